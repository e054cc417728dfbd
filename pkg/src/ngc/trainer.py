"""Warmup and per-epoch noisy-graph-cleaning training loop."""

from __future__ import annotations

import json
from dataclasses import dataclass, field

import numpy as np

from .dataset import OOD, Dataset
from .knn_graph import GraphParams, build_knn_graph
from .losses import Batch, LossParams, cross_entropy_loss, total_loss
from .metrics import selection_report
from .model import ToyModel, augment_embedding, backward, forward, predict_proba, sgd_step
from .ood import Prototypes, compute_prototypes
from .propagation import (
    PropagationError,
    PropagationParams,
    TemporalEnsemble,
    init_label_matrix,
    normalize_soft_labels,
    propagate,
    update_temporal_ensemble,
)
from .selection import SelectionState, subgraph_select


@dataclass(frozen=True)
class TrainParams:
    warmup_epochs: int = 5
    epochs: int = 50
    batch_size: int = 64
    lr: float = 0.05
    hidden_dim: int = 32
    proj_dim: int = 16
    eta: float = 0.8
    ensemble_momentum: float = 0.6
    normalize_soft_labels: bool = True
    clean_rows_from: str = "pseudo"

    def validate(self):
        if self.warmup_epochs < 0 or self.epochs < 0:
            raise ValueError("epoch counts must be >= 0")
        if self.batch_size < 1:
            raise ValueError("batch_size must be >= 1")
        if not np.isfinite(self.lr) or self.lr < 0:
            raise ValueError("lr must be finite and >= 0")
        if self.hidden_dim < 1 or self.proj_dim < 1:
            raise ValueError("hidden_dim and proj_dim must be >= 1")
        if not 0.0 <= self.eta <= 1.0:
            raise ValueError("eta must lie in [0, 1]")
        if not 0.0 <= self.ensemble_momentum < 1.0:
            raise ValueError("ensemble_momentum must lie in [0, 1)")
        if self.clean_rows_from not in ("pseudo", "given"):
            raise ValueError("clean_rows_from must be 'pseudo' or 'given'")


@dataclass(frozen=True)
class Hyper:
    graph: GraphParams = field(default_factory=GraphParams)
    propagation: PropagationParams = field(default_factory=PropagationParams)
    loss: LossParams = field(default_factory=LossParams)
    train: TrainParams = field(default_factory=TrainParams)

    def validate(self, num_samples: int | None = None):
        self.graph.validate(num_samples)
        self.propagation.validate()
        self.loss.validate()
        self.train.validate()


class TrainingError(RuntimeError):
    pass


def _batches(n, batch_size, rng):
    order = rng.permutation(n)
    return [order[s:s + batch_size] for s in range(0, n, batch_size)]


def warmup(model: ToyModel, dataset: Dataset, epochs: int, lr: float, batch_size: int, rng) -> ToyModel:
    """Cross-entropy on the given labels only; returns a trained copy."""
    if epochs < 0:
        raise ValueError("epochs must be >= 0")
    model = model.copy()
    x, y = dataset.embeddings, dataset.given_labels
    for _ in range(epochs):
        for idx in _batches(len(y), batch_size, rng):
            logits, _, cache = forward(model, x[idx])
            _, dlogits = cross_entropy_loss(logits, y[idx])
            sgd_step(model, backward(model, cache, dlogits=dlogits), lr)
    return model


@dataclass
class EpochResult:
    model: ToyModel
    ensemble: TemporalEnsemble
    selection: SelectionState
    report: dict


def clean_labels(z, probs, dataset: Dataset, previous: SelectionState, ensemble: TemporalEnsemble, hyper: Hyper):
    """Graph construction, propagation and selection for one epoch.

    Returns ``(ensemble, soft_labels, selection)``.
    """
    k = dataset.num_classes
    ensemble = update_temporal_ensemble(ensemble, probs)
    graph = build_knn_graph(z, hyper.graph)
    # "given" re-injects the noisy label of samples the previous epoch corrected
    source = previous.pseudo_labels if hyper.train.clean_rows_from == "pseudo" else dataset.given_labels
    y0 = init_label_matrix(source, k, previous.selected, ensemble)
    soft = propagate(graph, y0, hyper.propagation)
    if hyper.train.normalize_soft_labels:
        soft = normalize_soft_labels(soft)
    selection = subgraph_select(graph, soft, dataset.given_labels, hyper.train.eta, k)
    return ensemble, soft, selection


def train_epoch(
    model: ToyModel,
    dataset: Dataset,
    ensemble: TemporalEnsemble,
    previous: SelectionState,
    hyper: Hyper,
    rng,
    epoch: int = 0,
) -> EpochResult:
    """One epoch: clean the noisy graph, then one pass of minibatch descent."""
    x = dataset.embeddings
    logits, z, _ = forward(model, x)
    probs = predict_proba(model, x)
    try:
        ensemble, soft, selection = clean_labels(z, probs, dataset, previous, ensemble, hyper)
    except PropagationError as exc:
        raise TrainingError(f"epoch {epoch}: {exc}") from exc

    model = model.copy()
    lp, tp = hyper.loss, hyper.train
    sums = {"ce": 0.0, "inst": 0.0, "subgraph": 0.0}
    batches = _batches(len(x), tp.batch_size, rng)
    for idx in batches:
        view_a = augment_embedding(x[idx], lp.jitter_sigma, rng)
        view_b = augment_embedding(x[idx], lp.jitter_sigma, rng)
        logits_a, z_a, cache_a = forward(model, view_a)
        _, z_b, cache_b = forward(model, view_b)
        batch = Batch(np.vstack([z_a, z_b]), selection.pseudo_labels[idx], selection.selected[idx], logits_a)
        _, parts, dz, dlogits = total_loss(batch, lp, reduction="mean")
        n = len(idx)
        grads = backward(model, cache_a, dlogits=dlogits, dz=dz[:n])
        for name, g in backward(model, cache_b, dz=dz[n:]).items():
            grads[name] += g
        sgd_step(model, grads, tp.lr)
        for key in sums:
            sums[key] += parts[key]

    report = {
        "epoch": epoch,
        "loss_ce": sums["ce"] / len(batches),
        "loss_inst": sums["inst"] / len(batches),
        "loss_subgraph": sums["subgraph"] / len(batches),
        "selected_count": int(selection.selected.sum()),
    }
    if dataset.has_truth:
        stats = selection_report(
            selection.selected, dataset.given_labels, dataset.true_labels, selection.pseudo_labels
        )
        report["selected_noise_rate"] = stats["selected_noise_rate"]
        report["selected_label_noise_rate"] = stats["selected_label_noise_rate"]
        report["ood_selected"] = stats["ood_noise_selected"]
        report["corrected_label_error"] = corrected_label_error(selection.pseudo_labels, dataset.true_labels)
    return EpochResult(model, ensemble, selection, report)


def corrected_label_error(pseudo_labels, true_labels) -> float:
    """Fraction of IND samples whose pseudo-label misses the true class."""
    truth = np.asarray(true_labels)
    ind = truth != OOD
    return float(np.mean(np.asarray(pseudo_labels)[ind] != truth[ind]))


@dataclass
class FitResult:
    model: ToyModel
    selection: SelectionState
    prototypes: Prototypes | None
    log: list
    initial_noise_rate: float | None = None


def fit(dataset: Dataset, hyper: Hyper, seed: int = 0, log_stream=None) -> FitResult:
    """Warmup followed by ``hyper.train.epochs`` cleaning epochs.

    Prototypes are taken from the final model's embeddings with the last
    epoch's selection; they are None when no epoch ran.
    """
    hyper.validate(dataset.num_samples)
    tp = hyper.train
    init_seq, warm_seq, epoch_seq = np.random.SeedSequence(seed).spawn(3)
    model = ToyModel.init(dataset.dim, dataset.num_classes, tp.hidden_dim, tp.proj_dim, np.random.default_rng(init_seq))
    model = warmup(model, dataset, tp.warmup_epochs, tp.lr, tp.batch_size, np.random.default_rng(warm_seq))

    ensemble = TemporalEnsemble.zeros(dataset.num_samples, dataset.num_classes, tp.ensemble_momentum)
    selection = SelectionState.empty(dataset.num_samples)
    rng = np.random.default_rng(epoch_seq)
    log = []
    for epoch in range(1, tp.epochs + 1):
        result = train_epoch(model, dataset, ensemble, selection, hyper, rng, epoch)
        model, ensemble, selection = result.model, result.ensemble, result.selection
        log.append(result.report)
        if log_stream is not None:
            log_stream.write(json.dumps(result.report, sort_keys=True) + "\n")

    prototypes = None
    if tp.epochs > 0 and selection.selected.any():
        _, z, _ = forward(model, dataset.embeddings)
        prototypes = compute_prototypes(z, selection.pseudo_labels, selection.selected, dataset.num_classes)
    initial = float(dataset.is_noisy().mean()) if dataset.has_truth else None
    return FitResult(model, selection, prototypes, log, initial)

