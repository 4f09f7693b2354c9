"""Agglomerative baselines: single, complete, average, and Ward linkage.

Two merge engines share one tie rule (smallest merge cost, then the pair
with the lexicographically smallest (min id of A, min id of B)):

* ``method="lw"`` (default) keeps a working cluster-distance matrix updated
  with the exact Lance-Williams identities; O(n^2)-ish and the one used at
  experiment scale.
* ``method="naive"`` re-evaluates :func:`linkage_cost` on raw points for
  every active pair each round, exactly as the textbook loop reads.  It is
  the reference the fast path is tested against.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.spatial.distance import cdist

from .core import Dataset, HierarchicalClustering, Partition

LINKAGE_KINDS = ("single", "complete", "average", "ward")


def _coords(dataset: Dataset, ids) -> np.ndarray:
    return dataset.points[dataset.rows_of(sorted(ids))]


def _sse(points: np.ndarray) -> float:
    centroid = points.mean(axis=0)
    return float(((points - centroid) ** 2).sum())


def linkage_cost(dataset: Dataset, a_ids, b_ids, kind: str) -> float:
    """Merge cost of two disjoint nonempty blocks, by direct evaluation."""
    if kind not in LINKAGE_KINDS:
        raise ValueError(f"unknown linkage {kind!r}")
    a = frozenset(int(i) for i in a_ids)
    b = frozenset(int(i) for i in b_ids)
    if not a or not b:
        raise ValueError("blocks must be nonempty")
    if a & b:
        raise ValueError(f"blocks overlap on {sorted(a & b)}")
    pa, pb = _coords(dataset, a), _coords(dataset, b)
    if kind == "ward":
        return _sse(np.vstack([pa, pb])) - _sse(pa) - _sse(pb)
    d = cdist(pa, pb)
    if kind == "single":
        return float(d.min())
    if kind == "complete":
        return float(d.max())
    return float(d.mean())


@dataclass(frozen=True)
class Merge:
    a: frozenset
    b: frozenset
    cost: float


@dataclass(frozen=True)
class Dendrogram:
    ids: tuple
    merges: tuple

    @property
    def n(self) -> int:
        return len(self.ids)

    def cut(self, k: int) -> Partition:
        """Partition after n-k merges (k blocks)."""
        if not 1 <= k <= self.n:
            raise ValueError(f"k must be in 1..{self.n}, got {k}")
        blocks = {frozenset([i]) for i in self.ids}
        for merge in self.merges[: self.n - k]:
            blocks.remove(merge.a)
            blocks.remove(merge.b)
            blocks.add(merge.a | merge.b)
        return Partition(tuple(blocks))

    def to_hierarchy(self) -> HierarchicalClustering:
        """Center-free hierarchy with levels cut(1)..cut(n)."""
        levels = tuple(self.cut(k) for k in range(1, self.n + 1))
        return HierarchicalClustering((), levels, None)


def cut(dendrogram: Dendrogram, k: int) -> Partition:
    return dendrogram.cut(k)


def _lw_update(kind, size_a, size_b, size_c, d_ac, d_bc, d_ab):
    if kind == "single":
        return np.minimum(d_ac, d_bc)
    if kind == "complete":
        return np.maximum(d_ac, d_bc)
    if kind == "average":
        return (size_a * d_ac + size_b * d_bc) / (size_a + size_b)
    total = size_a + size_b + size_c
    return ((size_a + size_c) * d_ac + (size_b + size_c) * d_bc - size_c * d_ab) / total


def _agglomerate_lw(dataset: Dataset, kind: str) -> Dendrogram:
    n = dataset.n
    ids = [int(i) for i in dataset.ids]
    d = cdist(dataset.points, dataset.points)
    m = d ** 2 / 2.0 if kind == "ward" else d
    np.fill_diagonal(m, np.inf)
    active = np.ones(n, dtype=bool)
    size = np.ones(n)
    members = [[i] for i in ids]
    row_min = m.min(axis=1)
    row_arg = m.argmin(axis=1)
    merges = []
    for _ in range(n - 1):
        vals = np.where(active, row_min, np.inf)
        i0 = int(np.argmin(vals))
        v = vals[i0]
        j0 = int(np.flatnonzero(active & (m[i0] == v))[0])
        merges.append(Merge(frozenset(members[i0]), frozenset(members[j0]), float(v)))
        others = active.copy()
        others[i0] = others[j0] = False
        d_ab = m[i0, j0]
        new_row = _lw_update(kind, size[i0], size[j0], size[others], m[i0, others], m[j0, others], d_ab)
        active[j0] = False
        m[j0, :] = np.inf
        m[:, j0] = np.inf
        m[i0, others] = new_row
        m[others, i0] = new_row
        m[i0, i0] = np.inf
        size[i0] += size[j0]
        members[i0] = members[i0] + members[j0]
        row_min[i0] = m[i0].min()
        row_arg[i0] = m[i0].argmin()
        for c in np.flatnonzero(others):
            if row_arg[c] == i0 or row_arg[c] == j0:
                row_min[c] = m[c].min()
                row_arg[c] = m[c].argmin()
            elif m[c, i0] < row_min[c]:
                row_min[c] = m[c, i0]
                row_arg[c] = i0
    return Dendrogram(tuple(ids), tuple(merges))


def _agglomerate_naive(dataset: Dataset, kind: str) -> Dendrogram:
    ids = [int(i) for i in dataset.ids]
    blocks = [frozenset([i]) for i in ids]  # kept sorted by min id
    merges = []
    while len(blocks) > 1:
        best_key, best_pair = None, None
        for ia in range(len(blocks)):
            for ib in range(ia + 1, len(blocks)):
                cost = linkage_cost(dataset, blocks[ia], blocks[ib], kind)
                key = (cost, min(blocks[ia]), min(blocks[ib]))
                if best_key is None or key < best_key:
                    best_key, best_pair = key, (ia, ib)
        ia, ib = best_pair
        a, b = blocks[ia], blocks[ib]
        merges.append(Merge(a, b, best_key[0]))
        blocks = [blk for i, blk in enumerate(blocks) if i not in (ia, ib)]
        blocks.append(a | b)
        blocks.sort(key=min)
    return Dendrogram(tuple(ids), tuple(merges))


def agglomerate(dataset: Dataset, kind: str, method: str = "lw") -> Dendrogram:
    """Merge singletons bottom-up under the given linkage."""
    if kind not in LINKAGE_KINDS:
        raise ValueError(f"unknown linkage {kind!r}")
    if method not in ("lw", "naive"):
        raise ValueError(f"unknown method {method!r}")
    if dataset.n == 1:
        return Dendrogram((int(dataset.ids[0]),), ())
    if method == "naive":
        return _agglomerate_naive(dataset, kind)
    return _agglomerate_lw(dataset, kind)
