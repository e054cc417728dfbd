from collections import deque

import numpy as np
import pytest

from ngc.knn_graph import SparseGraph


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


def random_graph(rng, n, density=0.1):
    """Symmetric random graph with weights in (0, 1]."""
    upper = np.triu(rng.random((n, n)) < density, 1)
    w = np.where(upper, rng.uniform(0.05, 1.0, (n, n)), 0.0)
    return SparseGraph.from_dense(w + w.T)


def unit_rows(rng, n, d):
    z = rng.standard_normal((n, d))
    return z / np.linalg.norm(z, axis=1, keepdims=True)


def bfs_lcc(graph, candidates):
    """Component labelling by breadth-first search; ties go to the smallest node."""
    cand = sorted(set(int(c) for c in candidates))
    member = set(cand)
    adj = {v: [] for v in cand}
    for i, j in zip(graph.rows.tolist(), graph.cols.tolist()):
        if i in member and j in member:
            adj[i].append(j)
            adj[j].append(i)
    seen, best = set(), []
    for start in cand:  # ascending, so the first component of a given size has the smallest node
        if start in seen:
            continue
        comp, queue = [], deque([start])
        seen.add(start)
        while queue:
            v = queue.popleft()
            comp.append(v)
            for u in adj[v]:
                if u not in seen:
                    seen.add(u)
                    queue.append(u)
        if len(comp) > len(best):
            best = comp
    return sorted(best)
