"""Classification, OOD-detection and selection-quality metrics."""

from __future__ import annotations

from dataclasses import asdict, dataclass, field

import numpy as np
from scipy.stats import rankdata

from .dataset import OOD


def accuracy(predictions, truth) -> float:
    """Accuracy over IND samples only; OOD truths are ignored."""
    pred = np.asarray(predictions)
    truth = np.asarray(truth)
    ind = truth != OOD
    if not ind.any():
        raise ValueError("accuracy needs at least one IND sample")
    return float(np.mean(pred[ind] == truth[ind]))


def auroc(scores_ind, scores_ood) -> float:
    """Probability that an IND score beats an OOD score, ties counting one half.

    Computed from average ranks (Mann-Whitney U) in O(n log n).
    """
    a = np.asarray(scores_ind, dtype=np.float64).ravel()
    b = np.asarray(scores_ood, dtype=np.float64).ravel()
    if a.size == 0 or b.size == 0:
        raise ValueError("auroc needs non-empty IND and OOD score sets")
    ranks = rankdata(np.concatenate([a, b]))
    u = ranks[: a.size].sum() - a.size * (a.size + 1) / 2.0
    return float(u / (a.size * b.size))


def f_measure(pred_class, is_ood, truth, num_classes: int, per_class: bool = False):
    """Macro-averaged F over the known classes with rejections counted as misses.

    A sample predicted as class ``k`` (and not rejected) is a true positive
    for ``k`` if its truth is ``k`` and a false positive otherwise, OOD truths
    included. A true-``k`` sample that is rejected or assigned elsewhere is a
    false negative.
    """
    pred = np.where(np.asarray(is_ood, dtype=bool), OOD, np.asarray(pred_class))
    truth = np.asarray(truth)
    scores, precision, recall = [], [], []
    for k in range(num_classes):
        tp = np.sum((pred == k) & (truth == k))
        fp = np.sum((pred == k) & (truth != k))
        fn = np.sum((truth == k) & (pred != k))
        p = tp / (tp + fp) if tp + fp else 0.0
        r = tp / (tp + fn) if tp + fn else 0.0
        precision.append(float(p))
        recall.append(float(r))
        scores.append(2 * p * r / (p + r) if p + r else 0.0)
    macro = float(np.mean(scores))
    if per_class:
        return macro, precision, recall
    return macro


def zeta_sweep(scores, pred_class, truth, num_classes: int, zetas=None):
    """F-measure for every threshold in ``zetas`` (default -1..1 in steps of 0.01)."""
    if zetas is None:
        zetas = np.round(np.linspace(-1.0, 1.0, 201), 2)
    scores = np.asarray(scores)
    return [(float(z), f_measure(pred_class, scores < z, truth, num_classes)) for z in zetas]


def selection_report(selected, given_labels, true_labels, training_labels=None) -> dict:
    """Noise statistics of the selected subset; OOD samples always count as noisy.

    ``selected_noise_rate`` compares the *given* label with the truth. When
    ``training_labels`` (the pseudo-labels the selected samples are trained
    with) are passed, ``selected_label_noise_rate`` does the same for those,
    so a corrected sample no longer counts as noise.
    """
    g = np.asarray(selected, dtype=bool)
    given = np.asarray(given_labels)
    truth = np.asarray(true_labels)
    if g.shape != given.shape or given.shape != truth.shape:
        raise ValueError("selection, given labels and truth must have the same length")
    noisy = given != truth
    ood = truth == OOD
    size = int(g.sum())
    out = {
        "selected_count": size,
        "selected_noise_rate": float(noisy[g].mean()) if size else 0.0,
        "ind_noise_selected": int(np.sum(g & noisy & ~ood)),
        "ood_noise_selected": int(np.sum(g & ood)),
    }
    if training_labels is not None:
        wrong = np.asarray(training_labels) != truth
        out["selected_label_noise_rate"] = float(wrong[g].mean()) if size else 0.0
    return out


@dataclass
class MetricsReport:
    accuracy: float
    auroc: float | None
    f_measure: float
    zeta: float | None
    num_samples: int
    precision: list = field(default_factory=list)
    recall: list = field(default_factory=list)
    selected_count: int | None = None
    selected_noise_rate: float | None = None
    selected_label_noise_rate: float | None = None
    best_zeta: float | None = None
    best_f_measure: float | None = None

    def to_dict(self) -> dict:
        return asdict(self)
