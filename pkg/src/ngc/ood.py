"""Class prototypes and cosine-similarity OOD rejection."""

from __future__ import annotations

import csv
from dataclasses import dataclass

import numpy as np

from .dataset import normalize_rows
from .model import ToyModel, forward, load_arrays, save_arrays


class NoPrototypeError(ValueError):
    pass


@dataclass
class Prototypes:
    vectors: np.ndarray  # (K, P); invalid rows are zero
    support: np.ndarray  # selected samples per class

    @property
    def valid(self) -> np.ndarray:
        return self.support > 0

    def save(self, path) -> None:
        save_arrays(path, {"vectors": self.vectors, "support": self.support.astype(np.float64)})

    @classmethod
    def load(cls, path) -> "Prototypes":
        arrays = load_arrays(path)
        if "vectors" not in arrays or "support" not in arrays:
            raise NoPrototypeError(f"{path}: missing prototype arrays")
        return cls(arrays["vectors"], arrays["support"].astype(np.int64))


def compute_prototypes(z, pseudo_labels, selected, num_classes: int) -> Prototypes:
    """Normalised mean embedding of the selected samples of every class."""
    z = np.asarray(z, dtype=np.float64)
    y = np.asarray(pseudo_labels)
    g = np.asarray(selected, dtype=bool)
    sums = np.zeros((num_classes, z.shape[1]))
    np.add.at(sums, y[g], z[g])
    support = np.bincount(y[g], minlength=num_classes)
    if not support.any():
        raise NoPrototypeError("no class has a selected sample")
    means = np.zeros_like(sums)
    means[support > 0] = sums[support > 0] / support[support > 0, None]
    vectors, _ = normalize_rows(means)
    return Prototypes(vectors, support)


def ood_score(z, prototypes: Prototypes) -> np.ndarray:
    """Largest cosine similarity to any valid prototype; accepts one vector or a matrix."""
    valid = prototypes.valid
    if not valid.any():
        raise NoPrototypeError("no valid prototypes")
    z = np.asarray(z, dtype=np.float64)
    single = z.ndim == 1
    zn, _ = normalize_rows(np.atleast_2d(z))
    scores = np.clip((zn @ prototypes.vectors[valid].T).max(axis=1), -1.0, 1.0)
    return scores[0] if single else scores


@dataclass
class DetectionDecision:
    """Vectorised verdicts: ``is_ood[i]`` holds exactly when ``scores[i] < zeta``."""

    scores: np.ndarray
    is_ood: np.ndarray
    predicted_class: np.ndarray
    zeta: float

    def dump(self, path, ids=None) -> None:
        ids = np.arange(len(self.scores)) if ids is None else ids
        with open(path, "w", newline="") as fh:
            writer = csv.writer(fh, lineterminator="\n")
            writer.writerow(["id", "score", "verdict", "predicted_class"])
            for i in range(len(self.scores)):
                verdict = "OOD" if self.is_ood[i] else "IND"
                writer.writerow([ids[i], repr(float(self.scores[i])), verdict, int(self.predicted_class[i])])


def classify_or_reject(x, model: ToyModel, prototypes: Prototypes, zeta: float) -> DetectionDecision:
    """Reject as OOD when the prototype score falls below ``zeta``; else predict a class."""
    if not -1.0 <= zeta <= 1.0:
        raise ValueError(f"zeta must lie in [-1, 1], got {zeta}")
    logits, z, _ = forward(model, x)
    scores = ood_score(z, prototypes)
    return DetectionDecision(scores, scores < zeta, np.argmax(logits, axis=1), zeta)
