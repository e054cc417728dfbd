"""Embedding datasets, synthetic generation and label-noise injection."""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np

OOD = -1  # true_label marker for out-of-distribution samples


class DatasetError(ValueError):
    """Raised for invalid datasets or malformed dataset files."""


@dataclass(frozen=True, eq=False)
class Dataset:
    """Raw features with their given labels and optional ground truth.

    ``true_labels`` uses ``OOD`` (-1) for out-of-distribution samples and is
    ``None`` when ground truth is unknown.
    """

    embeddings: np.ndarray
    given_labels: np.ndarray
    num_classes: int
    true_labels: np.ndarray | None = None
    split: str = "train"
    ids: np.ndarray | None = None

    def __post_init__(self):
        x = np.ascontiguousarray(self.embeddings, dtype=np.float64)
        y = np.asarray(self.given_labels, dtype=np.int64)
        if x.ndim != 2 or x.shape[0] < 1 or x.shape[1] < 1:
            raise DatasetError(f"embeddings must be a non-empty 2-D array, got shape {x.shape}")
        if self.num_classes < 2:
            raise DatasetError(f"num_classes must be >= 2, got {self.num_classes}")
        if not np.all(np.isfinite(x)):
            raise DatasetError("embeddings contain non-finite values")
        if y.shape != (x.shape[0],):
            raise DatasetError("given_labels length does not match embeddings")
        if np.any((y < 0) | (y >= self.num_classes)):
            raise DatasetError(f"given labels must lie in [0, {self.num_classes})")
        if self.split not in ("train", "test"):
            raise DatasetError(f"split must be 'train' or 'test', got {self.split!r}")
        object.__setattr__(self, "embeddings", x)
        object.__setattr__(self, "given_labels", y)
        if self.true_labels is not None:
            t = np.asarray(self.true_labels, dtype=np.int64)
            if t.shape != y.shape:
                raise DatasetError("true_labels length does not match embeddings")
            if np.any((t < OOD) | (t >= self.num_classes)):
                raise DatasetError(f"true labels must lie in [0, {self.num_classes}) or be {OOD}")
            object.__setattr__(self, "true_labels", t)
        ids = np.arange(x.shape[0]) if self.ids is None else np.asarray(self.ids, dtype=np.int64)
        if ids.shape != y.shape or len(np.unique(ids)) != len(ids):
            raise DatasetError("ids must be unique, one per sample")
        object.__setattr__(self, "ids", ids)

    @property
    def num_samples(self) -> int:
        return self.embeddings.shape[0]

    @property
    def dim(self) -> int:
        return self.embeddings.shape[1]

    @property
    def has_truth(self) -> bool:
        return self.true_labels is not None

    def is_ood(self) -> np.ndarray:
        self._require_truth()
        return self.true_labels == OOD

    def is_noisy(self) -> np.ndarray:
        """Samples whose given label differs from the truth (OOD always noisy)."""
        self._require_truth()
        return self.given_labels != self.true_labels

    def _require_truth(self):
        if self.true_labels is None:
            raise DatasetError("dataset carries no ground truth")

    def __eq__(self, other):
        if not isinstance(other, Dataset):
            return NotImplemented
        same_truth = (self.true_labels is None and other.true_labels is None) or (
            self.true_labels is not None
            and other.true_labels is not None
            and np.array_equal(self.true_labels, other.true_labels)
        )
        return (
            self.num_classes == other.num_classes
            and self.split == other.split
            and np.array_equal(self.embeddings, other.embeddings)
            and np.array_equal(self.given_labels, other.given_labels)
            and np.array_equal(self.ids, other.ids)
            and same_truth
        )


@dataclass
class SyntheticConfig:
    """Gaussian-cluster stand-in for an image dataset with IND and OOD noise.

    Class centers sit on an orthonormal frame scaled so that every pair is
    exactly ``class_center_separation`` apart; OOD cluster centers lie at
    distance ``ood_center_offset`` from the origin along further frame
    directions. When ``dim`` is too small for an orthonormal frame, random
    centers are rescaled to the required minimum pairwise distance instead.
    """

    num_classes: int = 4
    dim: int = 16
    samples_per_class: int = 200
    class_center_separation: float = 6.0
    cluster_stddev: float = 0.8
    num_ood: int = 100
    ood_center_offset: float = 6.0
    ood_clusters: int = 2
    sym_noise_level: float = 0.0
    asym_noise_level: float = 0.0
    asym_mapping: list[int] | None = None
    test_samples_per_class: int = 25
    test_num_ood: int = 100
    rng_seed: int = 0

    def validate(self):
        if self.num_classes < 2:
            raise DatasetError(f"num_classes must be >= 2, got {self.num_classes}")
        if self.dim < 1:
            raise DatasetError(f"dim must be >= 1, got {self.dim}")
        for name in ("samples_per_class", "num_ood", "test_samples_per_class", "test_num_ood"):
            if getattr(self, name) < 0:
                raise DatasetError(f"{name} must be >= 0")
        if self.ood_clusters < 1:
            raise DatasetError("ood_clusters must be >= 1")
        for name in ("class_center_separation", "cluster_stddev", "ood_center_offset",
                     "sym_noise_level", "asym_noise_level"):
            if not math.isfinite(getattr(self, name)):
                raise DatasetError(f"{name} must be finite")
        if self.cluster_stddev <= 0:
            raise DatasetError("cluster_stddev must be > 0")
        for name in ("sym_noise_level", "asym_noise_level"):
            if not 0.0 <= getattr(self, name) <= 1.0:
                raise DatasetError(f"{name} must lie in [0, 1]")
        if self.sym_noise_level > 0 and self.asym_noise_level > 0:
            raise DatasetError("at most one of sym_noise_level / asym_noise_level may be > 0")
        if self.asym_mapping is not None:
            _check_mapping(self.asym_mapping, self.num_classes)


def cyclic_mapping(num_classes: int) -> np.ndarray:
    return (np.arange(num_classes) + 1) % num_classes


def _check_mapping(mapping, num_classes):
    m = np.asarray(mapping, dtype=np.int64)
    if m.shape != (num_classes,) or np.any((m < 0) | (m >= num_classes)):
        raise DatasetError(f"asym mapping must map every class into [0, {num_classes})")
    return m


def _cluster_centers(config: SyntheticConfig, rng: np.random.Generator):
    k, d, m = config.num_classes, config.dim, config.ood_clusters
    sep, off = config.class_center_separation, config.ood_center_offset
    if d >= k + m:
        frame, _ = np.linalg.qr(rng.standard_normal((d, k + m)))
        frame = frame.T
        return frame[:k] * (sep / math.sqrt(2.0)), frame[k:] * off
    centers = rng.standard_normal((k, d))
    dists = np.linalg.norm(centers[:, None] - centers[None], axis=-1)
    min_dist = dists[~np.eye(k, dtype=bool)].min()
    centers *= sep / min_dist
    directions = rng.standard_normal((m, d))
    directions /= np.linalg.norm(directions, axis=1, keepdims=True)
    return centers, directions * off


def generate_synthetic(config: SyntheticConfig, split: str = "train") -> Dataset:
    """Draw a noisy dataset from Gaussian clusters; a pure function of ``config``.

    Train and test splits share cluster centers. Label noise is injected into
    the IND part of the train split only; OOD samples always carry uniformly
    random given labels.
    """
    config.validate()
    if split not in ("train", "test"):
        raise DatasetError(f"split must be 'train' or 'test', got {split!r}")
    center_seq, train_seq, test_seq = np.random.SeedSequence(config.rng_seed).spawn(3)
    ind_centers, ood_centers = _cluster_centers(config, np.random.default_rng(center_seq))
    rng = np.random.default_rng(train_seq if split == "train" else test_seq)

    if split == "train":
        per_class, n_ood = config.samples_per_class, config.num_ood
    else:
        per_class, n_ood = config.test_samples_per_class, config.test_num_ood
    k = config.num_classes
    if per_class * k + n_ood == 0:
        raise DatasetError("empty dataset: no IND and no OOD samples requested")

    true_ind = np.repeat(np.arange(k), per_class)
    x_ind = ind_centers[true_ind] + config.cluster_stddev * rng.standard_normal((len(true_ind), config.dim))
    ood_cluster = rng.integers(0, len(ood_centers), size=n_ood)
    x_ood = ood_centers[ood_cluster] + config.cluster_stddev * rng.standard_normal((n_ood, config.dim))

    given_ind = true_ind.copy()
    if split == "train":
        if config.sym_noise_level > 0:
            given_ind = inject_symmetric_noise(given_ind, config.sym_noise_level, k, rng)
        elif config.asym_noise_level > 0:
            mapping = cyclic_mapping(k) if config.asym_mapping is None else config.asym_mapping
            given_ind = inject_asymmetric_noise(given_ind, config.asym_noise_level, mapping, rng)
    given_ood = rng.integers(0, k, size=n_ood)

    order = rng.permutation(len(true_ind) + n_ood)
    x = np.concatenate([x_ind, x_ood])[order]
    given = np.concatenate([given_ind, given_ood])[order]
    truth = np.concatenate([true_ind, np.full(n_ood, OOD)])[order]
    return Dataset(x, given, k, truth, split=split)


def _noise_indices(num_labels: int, level: float, rng: np.random.Generator) -> np.ndarray:
    if not 0.0 <= level <= 1.0:
        raise DatasetError(f"noise level must lie in [0, 1], got {level}")
    count = math.floor(level * num_labels)
    return rng.choice(num_labels, size=count, replace=False)


def inject_symmetric_noise(labels, level: float, num_classes: int, rng: np.random.Generator) -> np.ndarray:
    """Resample ``floor(level * M)`` distinct labels uniformly over all classes.

    A resampled label may coincide with the original one, so the corrupted
    fraction is ``level * (K - 1) / K`` in expectation.
    """
    labels = np.array(labels, dtype=np.int64)
    idx = _noise_indices(len(labels), level, rng)
    labels[idx] = rng.integers(0, num_classes, size=len(idx))
    return labels


def inject_asymmetric_noise(labels, level: float, mapping, rng: np.random.Generator) -> np.ndarray:
    """Replace ``floor(level * M)`` distinct labels ``y`` with ``mapping[y]``."""
    labels = np.array(labels, dtype=np.int64)
    m = np.asarray(mapping, dtype=np.int64)
    if np.any((m < 0) | (m >= len(m))):
        raise DatasetError("mapping target out of range")
    if labels.size and labels.max() >= len(m):
        raise DatasetError("label outside the mapping domain")
    idx = _noise_indices(len(labels), level, rng)
    labels[idx] = m[labels[idx]]
    return labels


def normalize_rows(matrix) -> tuple[np.ndarray, np.ndarray]:
    """Scale rows to unit L2 norm. Returns ``(normalized, zero_row_flags)``."""
    a = np.asarray(matrix, dtype=np.float64)
    norms = np.linalg.norm(a, axis=1)
    zero = norms == 0
    out = np.zeros_like(a)
    out[~zero] = a[~zero] / norms[~zero, None]
    return out, zero


# CSV persistence ---------------------------------------------------------

_FIXED_COLUMNS = ["id", "given_label", "true_label"]


def save_dataset(dataset: Dataset, path) -> None:
    """Write ``id,given_label,true_label,feat_0..`` with 17-digit floats."""
    header = _FIXED_COLUMNS + [f"feat_{j}" for j in range(dataset.dim)]
    with open(path, "w", newline="") as fh:
        fh.write(f"# num_classes={dataset.num_classes} split={dataset.split}\n")
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(header)
        for i in range(dataset.num_samples):
            truth = "" if dataset.true_labels is None else str(dataset.true_labels[i])
            feats = [repr(float(v)) for v in dataset.embeddings[i]]
            writer.writerow([dataset.ids[i], dataset.given_labels[i], truth, *feats])


def read_dataset_rows(path, num_classes: int | None = None):
    """Parse a dataset CSV without building a ``Dataset``.

    Returns ``(num_classes, meta, ids, given, truth, features)`` where
    ``truth`` is None when the true_label column is empty throughout. The
    file may hold zero data rows. ``num_classes`` defaults to the value in
    the file's leading comment line.
    """
    path = Path(path)
    meta = {}
    with open(path, newline="") as fh:
        lines = fh.read().splitlines()
    lineno = 0
    if lines and lines[0].startswith("#"):
        for token in lines[0][1:].split():
            key, _, value = token.partition("=")
            meta[key] = value
        lineno = 1
    if lineno >= len(lines) or not lines[lineno].strip():
        raise DatasetError(f"{path}: missing header")
    if num_classes is None:
        if "num_classes" not in meta:
            raise DatasetError(f"{path}: num_classes unknown (no header comment and none passed)")
        num_classes = int(meta["num_classes"])
    header = next(csv.reader([lines[lineno]]))
    if header[:3] != _FIXED_COLUMNS or len(header) < 4:
        raise DatasetError(f"{path}:{lineno + 1}: header must start with id,given_label,true_label,feat_0")
    dim = len(header) - 3
    if header[3:] != [f"feat_{j}" for j in range(dim)]:
        raise DatasetError(f"{path}:{lineno + 1}: feature columns must be feat_0..feat_{dim - 1}")

    ids, given, truth, feats = [], [], [], []
    for offset, row in enumerate(csv.reader(lines[lineno + 1:])):
        line = lineno + 2 + offset
        if not row:
            continue
        if len(row) != len(header):
            raise DatasetError(f"{path}:{line}: expected {len(header)} columns, got {len(row)}")
        try:
            ids.append(int(row[0]))
            given.append(int(row[1]))
            truth.append(None if row[2] == "" else int(row[2]))
            values = [float(v) for v in row[3:]]
        except ValueError as exc:
            raise DatasetError(f"{path}:{line}: {exc}") from None
        if not all(math.isfinite(v) for v in values):
            raise DatasetError(f"{path}:{line}: non-finite feature value")
        if not 0 <= given[-1] < num_classes:
            raise DatasetError(f"{path}:{line}: given_label {given[-1]} outside [0, {num_classes})")
        if truth[-1] is not None and not OOD <= truth[-1] < num_classes:
            raise DatasetError(f"{path}:{line}: true_label {truth[-1]} outside [0, {num_classes}) and not {OOD}")
        feats.append(values)

    has_truth = [t is not None for t in truth]
    if any(has_truth) and not all(has_truth):
        raise DatasetError(f"{path}: true_label must be given for all rows or none")
    truth_arr = np.array(truth, dtype=np.int64) if truth and all(has_truth) else None
    features = np.array(feats, dtype=np.float64).reshape(len(feats), dim)
    return num_classes, meta, np.array(ids, dtype=np.int64), np.array(given, dtype=np.int64), truth_arr, features


def load_dataset(path, num_classes: int | None = None) -> Dataset:
    """Load a dataset CSV written by :func:`save_dataset`.

    ``num_classes`` is taken from the file's comment line when not given.
    """
    num_classes, meta, ids, given, truth, features = read_dataset_rows(path, num_classes)
    if len(ids) == 0:
        raise DatasetError(f"{path}: no data rows")
    return Dataset(features, given, num_classes, truth, split=meta.get("split", "train"), ids=ids)
