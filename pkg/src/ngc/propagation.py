"""Soft pseudo-label propagation over a k-NN graph.

The refined label matrix minimises a graph-smoothness term plus a fidelity
term to the initial labels. Its stationarity condition is the linear system
``(I - alpha * S) Y_ref = (1 - alpha) * Y`` with the symmetrically
normalised adjacency ``S = D^-1/2 W D^-1/2``, solved column by column with
conjugate gradient.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp

from .knn_graph import SparseGraph


class PropagationError(RuntimeError):
    """CG failed to reach the requested residual."""

    def __init__(self, message, residual=None):
        super().__init__(message)
        self.residual = residual


@dataclass(frozen=True)
class PropagationParams:
    alpha: float = 0.5
    cg_tolerance: float = 1e-6
    cg_max_iters: int = 500

    def validate(self):
        if not 0.0 < self.alpha < 1.0:
            raise ValueError(f"alpha must lie strictly inside (0, 1), got {self.alpha}")
        if not self.cg_tolerance > 0:
            raise ValueError("cg_tolerance must be > 0")
        if self.cg_max_iters < 1:
            raise ValueError("cg_max_iters must be >= 1")


@dataclass
class SoftLabelMatrix:
    values: np.ndarray
    normalized: bool = False
    degenerate_rows: np.ndarray | None = None


@dataclass
class CGResult:
    x: np.ndarray
    iterations: int
    residuals: list = field(default_factory=list)

    @property
    def residual(self) -> float:
        return self.residuals[-1]


def conjugate_gradient(matvec, b, tol=1e-6, max_iters=500, callback=None) -> CGResult:
    """Plain CG from a zero start for a symmetric positive definite operator.

    Stops once the 2-norm of the residual is ``<= tol``; raises
    :class:`PropagationError` if that does not happen in ``max_iters`` steps.
    ``callback(x)`` is invoked with a copy of every iterate.
    """
    b = np.asarray(b, dtype=np.float64)
    x = np.zeros_like(b)
    r = b.copy()
    p = r.copy()
    rr = r @ r
    residuals = [np.sqrt(rr)]
    it = 0
    while residuals[-1] > tol:
        if it == max_iters:
            raise PropagationError(
                f"CG did not converge in {max_iters} iterations (residual {residuals[-1]:.3e})",
                residuals[-1],
            )
        ap = matvec(p)
        step = rr / (p @ ap)
        x += step * p
        r -= step * ap
        rr_new = r @ r
        p = r + (rr_new / rr) * p
        rr = rr_new
        residuals.append(np.sqrt(rr))
        if callback is not None:
            callback(x.copy())
        it += 1
    return CGResult(x, it, residuals)


def normalized_adjacency(graph: SparseGraph) -> sp.csr_matrix:
    """``D^-1/2 W D^-1/2`` with isolated nodes given an all-zero row and column."""
    w = graph.adjacency()
    d = graph.degrees
    inv_sqrt = np.zeros_like(d)
    nz = d > 0
    inv_sqrt[nz] = 1.0 / np.sqrt(d[nz])
    scale = sp.diags(inv_sqrt)
    return (scale @ w @ scale).tocsr()


def system_matrix(graph: SparseGraph, alpha: float) -> sp.csr_matrix:
    n = graph.num_nodes
    return (sp.identity(n, format="csr") - alpha * normalized_adjacency(graph)).tocsr()


def propagate(graph: SparseGraph, labels, params: PropagationParams = PropagationParams()) -> SoftLabelMatrix:
    """Solve ``(I - alpha S) Y_ref = (1 - alpha) Y`` per class column by CG."""
    params.validate()
    y = np.asarray(labels, dtype=np.float64)
    if y.ndim != 2 or y.shape[0] != graph.num_nodes:
        raise ValueError(f"label matrix shape {y.shape} does not match {graph.num_nodes} nodes")
    a = system_matrix(graph, params.alpha)
    rhs = (1.0 - params.alpha) * y
    out = np.empty_like(y)
    for c in range(y.shape[1]):
        try:
            out[:, c] = conjugate_gradient(a.dot, rhs[:, c], params.cg_tolerance, params.cg_max_iters).x
        except PropagationError as exc:
            raise PropagationError(f"class column {c}: {exc}", exc.residual) from None
    return SoftLabelMatrix(out, normalized=False)


def normalize_soft_labels(soft) -> SoftLabelMatrix:
    """Clamp negatives to 0 and L1-normalise rows; zero rows become uniform."""
    values = soft.values if isinstance(soft, SoftLabelMatrix) else soft
    v = np.maximum(np.asarray(values, dtype=np.float64), 0.0)
    sums = v.sum(axis=1)
    zero = sums <= 0
    out = np.empty_like(v)
    out[~zero] = v[~zero] / sums[~zero, None]
    out[zero] = 1.0 / v.shape[1]
    return SoftLabelMatrix(out, normalized=True, degenerate_rows=zero)


def hard_pseudo_labels(soft) -> np.ndarray:
    """Row-wise argmax; ``np.argmax`` already returns the first (smallest) maximiser."""
    values = soft.values if isinstance(soft, SoftLabelMatrix) else soft
    return np.argmax(values, axis=1)


def one_hot(labels, num_classes: int) -> np.ndarray:
    out = np.zeros((len(labels), num_classes))
    out[np.arange(len(labels)), labels] = 1.0
    return out


@dataclass
class TemporalEnsemble:
    """Exponential moving average of softmax predictions with bias correction.

    ``accumulator`` holds the raw running average; ``ema_predictions`` is the
    bias-corrected view ``accumulator / (1 - momentum**step)``.
    """

    accumulator: np.ndarray
    momentum: float = 0.6
    step: int = 0

    @classmethod
    def zeros(cls, num_samples: int, num_classes: int, momentum: float = 0.6) -> "TemporalEnsemble":
        if not 0.0 <= momentum < 1.0:
            raise ValueError(f"momentum must lie in [0, 1), got {momentum}")
        return cls(np.zeros((num_samples, num_classes)), momentum, 0)

    @property
    def ema_predictions(self) -> np.ndarray:
        if self.step == 0:
            k = self.accumulator.shape[1]
            return np.full_like(self.accumulator, 1.0 / k)
        return self.accumulator / (1.0 - self.momentum**self.step)


def update_temporal_ensemble(te: TemporalEnsemble, predictions) -> TemporalEnsemble:
    p = np.asarray(predictions, dtype=np.float64)
    if p.shape != te.accumulator.shape:
        raise ValueError(f"predictions shape {p.shape} does not match ensemble {te.accumulator.shape}")
    acc = te.momentum * te.accumulator + (1.0 - te.momentum) * p
    return TemporalEnsemble(acc, te.momentum, te.step + 1)


def init_label_matrix(labels, num_classes: int, selected, te: TemporalEnsemble) -> np.ndarray:
    """One-hot ``labels`` for selected rows, ensemble prediction elsewhere.

    The trainer passes the previous epoch's pseudo-labels, which equal the
    given labels for every sample selected on the given-label branch.
    """
    g = np.asarray(selected, dtype=bool)
    y = np.array(te.ema_predictions, dtype=np.float64)
    if y.shape != (len(g), num_classes):
        raise ValueError("selection and ensemble sizes disagree")
    y[g] = one_hot(np.asarray(labels)[g], num_classes)
    return y
