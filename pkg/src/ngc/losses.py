"""Contrastive and classification losses with analytic gradients.

Contrastive losses take the stacked embeddings of a batch ``z`` with shape
``(2n, d)``: rows ``0..n-1`` are the anchors ``I`` and row ``i + n`` is the
second augmented view of anchor ``i``. Every anchor contrasts against all
other ``2n - 1`` rows. Losses are summed over anchors unless
``reduction="mean"``.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.special import logsumexp, log_softmax, softmax


@dataclass(frozen=True)
class LossParams:
    tau1: float = 0.3
    tau2: float = 1.0
    lambda1: float = 1.0
    lambda2: float = 1.0
    jitter_sigma: float = 1.0

    def validate(self):
        if not (self.tau1 > 0 and self.tau2 > 0):
            raise ValueError("temperatures must be > 0")
        if self.lambda1 < 0 or self.lambda2 < 0:
            raise ValueError("loss weights must be >= 0")
        if self.jitter_sigma < 0:
            raise ValueError("jitter_sigma must be >= 0")


@dataclass
class Batch:
    """Embeddings of both views plus the labels needed by every loss term."""

    z: np.ndarray
    pseudo_labels: np.ndarray
    selected: np.ndarray
    logits: np.ndarray

    def __post_init__(self):
        n = len(self.pseudo_labels)
        if self.z.shape[0] != 2 * n:
            raise ValueError(f"expected {2 * n} embedding rows (two views), got {self.z.shape[0]}")
        if len(self.selected) != n or self.logits.shape[0] != n:
            raise ValueError("labels, indicators and logits must cover the same anchors")


def _anchor_log_probs(z, tau):
    """Log-softmax of anchor similarities over each anchor's contrast set."""
    n = z.shape[0] // 2
    if n == 0:
        raise ValueError("empty batch: the contrast set of every anchor is empty")
    sim = z[:n] @ z.T / tau
    sim[np.arange(n), np.arange(n)] = -np.inf
    return sim - logsumexp(sim, axis=1, keepdims=True)


def _sim_backward(z, coef, tau):
    # d/dz of sum(coef * z[:n] @ z.T / tau)
    n = coef.shape[0]
    grad = coef.T @ z[:n] / tau
    grad[:n] += coef @ z / tau
    return grad


def _reduce(loss, grad, n, reduction):
    if reduction == "sum":
        return loss, grad
    if reduction == "mean":
        return loss / n, grad / n
    raise ValueError(f"unknown reduction {reduction!r}")


def instance_contrastive_loss(z, tau: float, reduction: str = "sum"):
    """Each anchor must pick out its own second view among all other rows.

    Returns ``(loss, dloss/dz)``.
    """
    z = np.asarray(z, dtype=np.float64)
    n = z.shape[0] // 2
    log_prob = _anchor_log_probs(z, tau)
    pos = np.arange(n) + n
    loss = -log_prob[np.arange(n), pos].sum()
    coef = np.exp(log_prob)
    coef[np.arange(n), pos] -= 1.0
    return _reduce(loss, _sim_backward(z, coef, tau), n, reduction)


def positive_mask(pseudo_labels, selected) -> np.ndarray:
    """``(n, 2n)`` mask of positives: same pseudo-label, both selected, not self."""
    y = np.asarray(pseudo_labels)
    g = np.asarray(selected, dtype=bool)
    n = len(y)
    y2, g2 = np.concatenate([y, y]), np.concatenate([g, g])
    mask = (y[:, None] == y2[None, :]) & g[:, None] & g2[None, :]
    mask[np.arange(n), np.arange(n)] = False
    return mask


def subgraph_contrastive_loss(z, pseudo_labels, selected, tau: float, reduction: str = "sum"):
    """Pull selected same-label samples together; anchors without positives add 0.

    Returns ``(loss, dloss/dz)``.
    """
    z = np.asarray(z, dtype=np.float64)
    n = z.shape[0] // 2
    log_prob = _anchor_log_probs(z, tau)
    pos = positive_mask(pseudo_labels, selected)
    counts = pos.sum(axis=1)
    active = counts > 0
    weights = np.zeros_like(log_prob)
    weights[active] = pos[active] / counts[active, None]
    loss = -np.where(pos, log_prob, 0.0)[active].sum(axis=1) @ (1.0 / counts[active])
    coef = np.exp(log_prob) - weights
    coef[~active] = 0.0
    return _reduce(float(loss), _sim_backward(z, coef, tau), n, reduction)


def cross_entropy_loss(logits, labels, selected=None):
    """Mean cross-entropy over selected rows (all rows if ``selected`` is None).

    Returns ``(loss, dloss/dlogits)``; zero with zero gradient when nothing
    is selected.
    """
    logits = np.asarray(logits, dtype=np.float64)
    labels = np.asarray(labels)
    mask = np.ones(len(labels), dtype=bool) if selected is None else np.asarray(selected, dtype=bool)
    grad = np.zeros_like(logits)
    m = int(mask.sum())
    if m == 0:
        return 0.0, grad
    rows = np.flatnonzero(mask)
    lsm = log_softmax(logits[rows], axis=1)
    loss = -lsm[np.arange(m), labels[rows]].sum() / m
    g = softmax(logits[rows], axis=1)
    g[np.arange(m), labels[rows]] -= 1.0
    grad[rows] = g / m
    return float(loss), grad


def total_loss(batch: Batch, params: LossParams, reduction: str = "sum"):
    """Weighted objective ``ce + lambda1 * inst + lambda2 * subgraph``.

    Returns ``(total, parts, dz, dlogits)`` where ``parts`` maps each term's
    name to its unweighted value.
    """
    ce, dlogits = cross_entropy_loss(batch.logits, batch.pseudo_labels, batch.selected)
    inst, dz_inst = instance_contrastive_loss(batch.z, params.tau1, reduction)
    sub, dz_sub = subgraph_contrastive_loss(batch.z, batch.pseudo_labels, batch.selected, params.tau2, reduction)
    total = ce + params.lambda1 * inst + params.lambda2 * sub
    dz = params.lambda1 * dz_inst + params.lambda2 * dz_sub
    return total, {"ce": ce, "inst": float(inst), "subgraph": sub}, dz, dlogits
