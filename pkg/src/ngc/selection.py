"""Clean-sample selection: confidence pruning then per-class largest components."""

from __future__ import annotations

import csv
from dataclasses import dataclass, field

import numpy as np

from .knn_graph import SparseGraph, refine_graph
from .propagation import SoftLabelMatrix, hard_pseudo_labels


class DisjointSet:
    """Union-find with union by rank and path compression."""

    def __init__(self, size: int):
        self.parent = list(range(size))
        self.rank = [0] * size

    def find(self, a: int) -> int:
        root = a
        parent = self.parent
        while parent[root] != root:
            root = parent[root]
        while parent[a] != root:
            parent[a], a = root, parent[a]
        return root

    def union(self, a: int, b: int) -> bool:
        ra, rb = self.find(a), self.find(b)
        if ra == rb:
            return False
        if self.rank[ra] < self.rank[rb]:
            ra, rb = rb, ra
        self.parent[rb] = ra
        if self.rank[ra] == self.rank[rb]:
            self.rank[ra] += 1
        return True

    def connected(self, a: int, b: int) -> bool:
        return self.find(a) == self.find(b)


@dataclass
class SelectionState:
    """Outcome of one round of selection over ``N`` nodes.

    ``selected`` is the final indicator g, ``pseudo_labels`` the hard labels
    after the given-label override, ``per_class_lcc`` the node indices of
    each class's largest component (their union is the clean set).
    """

    selected: np.ndarray
    pseudo_labels: np.ndarray
    per_class_lcc: dict = field(default_factory=dict)
    confident: np.ndarray | None = None
    trusts_given: np.ndarray | None = None

    @classmethod
    def empty(cls, num_samples: int) -> "SelectionState":
        return cls(np.zeros(num_samples, dtype=bool), np.zeros(num_samples, dtype=np.int64))

    @property
    def clean_set(self) -> np.ndarray:
        if not self.per_class_lcc:
            return np.zeros(0, dtype=np.int64)
        return np.sort(np.concatenate([np.asarray(v, dtype=np.int64) for v in self.per_class_lcc.values()]))

    def in_lcc(self) -> np.ndarray:
        mask = np.zeros(len(self.selected), dtype=bool)
        mask[self.clean_set] = True
        return mask

    def dump(self, path, ids=None) -> None:
        """Write ``id,g,pseudo_label,in_lcc`` rows."""
        ids = np.arange(len(self.selected)) if ids is None else ids
        lcc = self.in_lcc()
        with open(path, "w", newline="") as fh:
            writer = csv.writer(fh, lineterminator="\n")
            writer.writerow(["id", "g", "pseudo_label", "in_lcc"])
            for i in range(len(self.selected)):
                writer.writerow([ids[i], int(self.selected[i]), int(self.pseudo_labels[i]), int(lcc[i])])


def confidence_select(soft, given_labels, eta: float, num_classes: int):
    """Confidence rule on normalised soft labels.

    Returns ``(keep, trusts_given)``: a node is kept when its score on the
    given label beats uniform (``trusts_given``), or otherwise when its top
    score exceeds ``eta``. Both comparisons are strict.
    """
    if not 0.0 <= eta <= 1.0:
        raise ValueError(f"eta must lie in [0, 1], got {eta}")
    values = soft.values if isinstance(soft, SoftLabelMatrix) else np.asarray(soft)
    y = np.asarray(given_labels)
    trusts_given = values[np.arange(len(y)), y] > 1.0 / num_classes
    keep = trusts_given | (values.max(axis=1) > eta)
    return keep, trusts_given


def class_subgraph(graph: SparseGraph, pseudo_labels, k: int) -> SparseGraph:
    """Keep only edges whose endpoints both carry pseudo-label ``k``."""
    in_class = np.asarray(pseudo_labels) == k
    return refine_graph(graph, in_class)


def largest_connected_component(graph: SparseGraph, candidates) -> np.ndarray:
    """Largest component among ``candidates`` using edges inside the candidate set.

    Equal-size components are resolved in favour of the one holding the
    smallest node index. Returns sorted node indices.
    """
    nodes = np.unique(np.asarray(candidates, dtype=np.int64))
    if nodes.size == 0:
        return nodes
    member = np.zeros(graph.num_nodes, dtype=bool)
    member[nodes] = True
    ds = DisjointSet(graph.num_nodes)
    inside = member[graph.rows] & member[graph.cols]
    for a, b in zip(graph.rows[inside].tolist(), graph.cols[inside].tolist()):
        ds.union(a, b)
    roots = np.array([ds.find(int(v)) for v in nodes])
    _, first, counts = np.unique(roots, return_index=True, return_counts=True)
    # ``first`` indexes into sorted ``nodes``, so it orders components by smallest member
    best = min(range(len(counts)), key=lambda c: (-counts[c], first[c]))
    return nodes[roots == roots[first[best]]]


def subgraph_select(graph: SparseGraph, soft, given_labels, eta: float, num_classes: int) -> SelectionState:
    """Confidence pruning, graph refinement and per-class LCC selection."""
    values = soft.values if isinstance(soft, SoftLabelMatrix) else np.asarray(soft)
    y = np.asarray(given_labels)
    keep, trusts_given = confidence_select(values, y, eta, num_classes)
    pseudo = hard_pseudo_labels(values)
    pseudo[trusts_given] = y[trusts_given]

    refined = refine_graph(graph, keep)
    per_class = {}
    for k in range(num_classes):
        candidates = np.flatnonzero(keep & (pseudo == k))
        per_class[k] = largest_connected_component(class_subgraph(refined, pseudo, k), candidates)

    selected = np.zeros(len(y), dtype=bool)
    for nodes in per_class.values():
        selected[nodes] = True
    # every LCC node passed one branch of the confidence rule, so membership in S is the final test
    selected &= keep
    return SelectionState(selected, pseudo, per_class, confident=keep, trusts_given=trusts_given)
