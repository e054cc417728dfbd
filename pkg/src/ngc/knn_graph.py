"""Weighted k-nearest-neighbour graphs over unit-norm embeddings."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp


class GraphError(ValueError):
    pass


@dataclass(frozen=True, eq=False)
class SparseGraph:
    """Undirected graph stored as its upper-triangle edge list.

    ``rows[e] < cols[e]`` for every edge, weights are strictly positive and
    edges are kept sorted by ``(row, col)``.
    """

    num_nodes: int
    rows: np.ndarray
    cols: np.ndarray
    weights: np.ndarray

    def __post_init__(self):
        rows = np.asarray(self.rows, dtype=np.int64)
        cols = np.asarray(self.cols, dtype=np.int64)
        w = np.asarray(self.weights, dtype=np.float64)
        if not (rows.shape == cols.shape == w.shape) or rows.ndim != 1:
            raise GraphError("rows, cols and weights must be 1-D arrays of equal length")
        if rows.size:
            if np.any(rows >= cols):
                raise GraphError("edges must satisfy row < col (no self-loops)")
            if rows.min() < 0 or cols.max() >= self.num_nodes:
                raise GraphError("edge endpoint out of range")
            if not np.all(np.isfinite(w)) or np.any(w <= 0):
                raise GraphError("edge weights must be finite and > 0")
        order = np.lexsort((cols, rows))
        rows, cols, w = rows[order], cols[order], w[order]
        if rows.size > 1 and np.any((np.diff(rows) == 0) & (np.diff(cols) == 0)):
            raise GraphError("duplicate edge")
        object.__setattr__(self, "rows", rows)
        object.__setattr__(self, "cols", cols)
        object.__setattr__(self, "weights", w)
        deg = np.zeros(self.num_nodes)
        # accumulate in edge-list order so the cache is reproducible from the edges alone
        np.add.at(deg, np.column_stack([rows, cols]).ravel(), np.repeat(w, 2))
        object.__setattr__(self, "_degrees", deg)

    @property
    def num_edges(self) -> int:
        return len(self.weights)

    @property
    def degrees(self) -> np.ndarray:
        return self._degrees

    def adjacency(self) -> sp.csr_matrix:
        """Symmetric weight matrix ``W`` as CSR."""
        n = self.num_nodes
        r = np.concatenate([self.rows, self.cols])
        c = np.concatenate([self.cols, self.rows])
        return sp.csr_matrix((np.concatenate([self.weights, self.weights]), (r, c)), shape=(n, n))

    def edge_mask(self, mask: np.ndarray) -> "SparseGraph":
        return SparseGraph(self.num_nodes, self.rows[mask], self.cols[mask], self.weights[mask])

    def dump(self, path) -> None:
        """Write one ``i j w`` line per edge, sorted by ``(i, j)``."""
        with open(path, "w") as fh:
            for i, j, w in zip(self.rows, self.cols, self.weights):
                fh.write(f"{i} {j} {float(w)!r}\n")

    @classmethod
    def from_dense(cls, w: np.ndarray) -> "SparseGraph":
        """Build from a symmetric dense matrix; the diagonal is ignored."""
        w = np.asarray(w, dtype=np.float64)
        if w.shape[0] != w.shape[1] or not np.allclose(w, w.T, rtol=0, atol=0):
            raise GraphError("weight matrix must be square and symmetric")
        r, c = np.nonzero(np.triu(w, 1))
        return cls(w.shape[0], r, c, w[r, c])

    def to_dense(self) -> np.ndarray:
        return self.adjacency().toarray()


@dataclass(frozen=True)
class GraphParams:
    k: int = 10
    gamma: float = 1.0
    symmetrize: str = "max"

    def validate(self, num_nodes: int | None = None):
        if self.k < 1:
            raise GraphError(f"k must be >= 1, got {self.k}")
        if num_nodes is not None and self.k >= num_nodes:
            raise GraphError(f"k must be < N (k={self.k}, N={num_nodes})")
        if not np.isfinite(self.gamma) or self.gamma < 0:
            raise GraphError(f"gamma must be finite and >= 0, got {self.gamma}")
        if self.symmetrize not in ("max", "mean"):
            raise GraphError(f"symmetrize must be 'max' or 'mean', got {self.symmetrize!r}")


def _check_embeddings(z, k):
    z = np.asarray(z, dtype=np.float64)
    if z.ndim != 2:
        raise GraphError("embeddings must be a 2-D array")
    if not np.all(np.isfinite(z)):
        raise GraphError("embeddings contain non-finite values")
    if k < 1 or k >= z.shape[0]:
        raise GraphError(f"k must satisfy 1 <= k < N (k={k}, N={z.shape[0]})")
    return z


def knn_indices(z, k: int, chunk: int = 2048) -> tuple[np.ndarray, np.ndarray]:
    """Exact top-``k`` neighbours of every row by dot product.

    Returns ``(indices, similarities)``, both ``(N, k)``, best first. Ties go
    to the smaller index; a row never lists itself.
    """
    z = _check_embeddings(z, k)
    n = z.shape[0]
    idx = np.empty((n, k), dtype=np.int64)
    sims = np.empty((n, k))
    for start in range(0, n, chunk):
        stop = min(start + chunk, n)
        block = z[start:stop] @ z.T
        block[np.arange(stop - start), np.arange(start, stop)] = -np.inf
        # stable sort on negated similarity keeps the smaller index first on ties
        order = np.argsort(-block, axis=1, kind="stable")[:, :k]
        idx[start:stop] = order
        sims[start:stop] = np.take_along_axis(block, order, axis=1)
    return idx, sims


def directed_knn_weights(z, params: GraphParams) -> sp.csr_matrix:
    """Asymmetric matrix with ``W[i, j] = max(z_i.z_j, 0)^gamma`` for ``i`` in NN_k(j)."""
    params.validate()
    idx, sims = knn_indices(z, params.k)
    n = idx.shape[0]
    w = np.maximum(sims, 0.0)
    keep = w > 0
    w = w**params.gamma
    cols = np.repeat(np.arange(n), params.k)
    mat = sp.csr_matrix((w[keep], (idx[keep], cols[keep.ravel()])), shape=(n, n))
    mat.eliminate_zeros()
    return mat


def build_knn_graph(z, params: GraphParams) -> SparseGraph:
    """Undirected k-NN graph with hinge-clipped cosine weights."""
    z = _check_embeddings(z, params.k)
    params.validate(z.shape[0])
    w = directed_knn_weights(z, params)
    sym = w.maximum(w.T) if params.symmetrize == "max" else (w + w.T) * 0.5
    upper = sp.triu(sym, k=1).tocoo()
    keep = upper.data > 0
    return SparseGraph(z.shape[0], upper.row[keep], upper.col[keep], upper.data[keep])


def refine_graph(graph: SparseGraph, keep) -> SparseGraph:
    """Drop every edge with an endpoint whose ``keep`` flag is 0; nodes stay."""
    keep = np.asarray(keep, dtype=bool)
    if keep.shape != (graph.num_nodes,):
        raise GraphError(f"indicator length {keep.shape} does not match {graph.num_nodes} nodes")
    return graph.edge_mask(keep[graph.rows] & keep[graph.cols])
