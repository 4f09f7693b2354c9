"""Point sets with stable ids, k-median cost, partitions, and nestedness checks.

Everything here is pure geometry and bookkeeping; the small exhaustive
oracles (`opt_kmedian_discrete`) exist so tests can compare algorithm output
against ground truth on tiny instances.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field

import numpy as np
from scipy.spatial.distance import cdist, pdist


class DegenerateDataError(ValueError):
    """Input geometry violates a precondition (typically duplicate points)."""


class SizeGuardError(ValueError):
    """An exhaustive oracle was asked to handle too large an instance."""


def _validate_points(points) -> np.ndarray:
    pts = np.asarray(points, dtype=float)
    if pts.ndim == 1:
        pts = pts[:, None]
    if pts.ndim != 2:
        raise ValueError(f"points must form a 2-d array, got shape {pts.shape}")
    if pts.shape[0] < 1 or pts.shape[1] < 1:
        raise ValueError("dataset needs at least one point and one dimension")
    if not np.all(np.isfinite(pts)):
        raise ValueError("all coordinates must be finite")
    return pts


def duplicate_id_pairs(points: np.ndarray, ids: np.ndarray) -> list[tuple[int, int]]:
    """Pairs of ids whose coordinate rows are exactly identical."""
    order = np.lexsort(points.T[::-1])
    srt = points[order]
    same = np.all(srt[1:] == srt[:-1], axis=1)
    pairs = []
    for pos in np.flatnonzero(same):
        pairs.append((int(ids[order[pos]]), int(ids[order[pos + 1]])))
    return pairs


@dataclass(frozen=True)
class Dataset:
    """Ordered point set with stable integer ids.

    Fresh datasets use ids 0..n-1; :meth:`drop` keeps the surviving points'
    original ids so outputs on the full and perturbed data stay comparable.
    Ids are required to be strictly increasing so that row order and id order
    coincide (smallest-id tie breaking is then just first-hit argmin).
    """

    points: np.ndarray
    ids: np.ndarray
    _row_of: dict = field(repr=False, compare=False, default=None)

    def __post_init__(self):
        pts = _validate_points(self.points)
        ids = np.asarray(self.ids, dtype=np.int64)
        if ids.shape != (pts.shape[0],):
            raise ValueError("ids must be one integer per point")
        if ids.size > 1 and not np.all(np.diff(ids) > 0):
            raise ValueError("ids must be strictly increasing")
        pairs = duplicate_id_pairs(pts, ids)
        if pairs:
            raise DegenerateDataError(f"duplicate points for id pairs {pairs}")
        pts = pts.copy()
        pts.setflags(write=False)
        ids = ids.copy()
        ids.setflags(write=False)
        object.__setattr__(self, "points", pts)
        object.__setattr__(self, "ids", ids)
        object.__setattr__(self, "_row_of", {int(i): r for r, i in enumerate(ids)})

    @classmethod
    def from_points(cls, points, ids=None) -> "Dataset":
        pts = _validate_points(points)
        if ids is None:
            ids = np.arange(pts.shape[0], dtype=np.int64)
        return cls(pts, np.asarray(ids, dtype=np.int64))

    @property
    def n(self) -> int:
        return self.points.shape[0]

    @property
    def dim(self) -> int:
        return self.points.shape[1]

    def row_of(self, point_id: int) -> int:
        try:
            return self._row_of[int(point_id)]
        except KeyError:
            raise KeyError(f"unknown point id {point_id}") from None

    def rows_of(self, point_ids) -> np.ndarray:
        return np.asarray([self.row_of(i) for i in point_ids], dtype=np.int64)

    def coords_of(self, point_id: int) -> np.ndarray:
        return self.points[self.row_of(point_id)]

    def drop(self, point_ids) -> "Dataset":
        """Dataset without the given ids; survivors keep their ids."""
        gone = {int(i) for i in point_ids}
        unknown = gone - set(self._row_of)
        if unknown:
            raise KeyError(f"unknown point ids {sorted(unknown)}")
        keep = np.asarray([i not in gone for i in self.ids.tolist()], dtype=bool)
        if not keep.any():
            raise ValueError("cannot delete every point")
        return Dataset(self.points[keep], self.ids[keep])


@dataclass(frozen=True)
class Partition:
    """Disjoint nonempty blocks of point ids.

    The ground set is the union of the blocks.  An empty partition (no
    blocks over an empty ground set) is allowed so that e.g. an all-noise
    density clustering is representable.
    """

    blocks: tuple
    ground: frozenset = field(default=None, compare=False)

    def __post_init__(self):
        blocks = tuple(frozenset(int(i) for i in b) for b in self.blocks)
        total = 0
        ground = set()
        for b in blocks:
            if not b:
                raise ValueError("partition blocks must be nonempty")
            total += len(b)
            ground |= b
        if total != len(ground):
            raise ValueError("partition blocks must be pairwise disjoint")
        object.__setattr__(self, "blocks", blocks)
        object.__setattr__(self, "ground", frozenset(ground))

    @classmethod
    def from_blocks(cls, blocks) -> "Partition":
        return cls(tuple(blocks))

    @classmethod
    def from_labels(cls, ids, labels) -> "Partition":
        groups: dict = {}
        for i, lab in zip(ids, labels):
            groups.setdefault(lab, set()).add(int(i))
        return cls(tuple(groups[key] for key in sorted(groups)))

    @classmethod
    def whole(cls, ids) -> "Partition":
        return cls((frozenset(int(i) for i in ids),))

    @classmethod
    def singletons(cls, ids) -> "Partition":
        return cls(tuple(frozenset([int(i)]) for i in ids))

    @property
    def k(self) -> int:
        return len(self.blocks)

    def sorted_blocks(self) -> tuple:
        """Blocks in canonical order (ascending smallest member)."""
        return tuple(sorted(self.blocks, key=min))

    def labels(self, ids) -> np.ndarray:
        """Block index (canonical order) for each id in the given order."""
        owner = {}
        for idx, b in enumerate(self.sorted_blocks()):
            for i in b:
                owner[i] = idx
        return np.asarray([owner[int(i)] for i in ids], dtype=np.int64)


@dataclass(frozen=True)
class HierarchicalClustering:
    """Ordered centers plus the nested partition sequence they induce.

    ``levels[t-1]`` has exactly t blocks.  ``centers`` may be empty for
    center-free hierarchies (agglomerative output).  ``costs`` is per-level
    clustering cost, flagged by ``cost_kind`` ("tree" or "euclidean"), or
    None when no cost accompanies the hierarchy.
    """

    centers: tuple
    levels: tuple
    costs: tuple = None
    cost_kind: str = "tree"

    def __post_init__(self):
        centers = tuple(int(c) for c in self.centers)
        levels = tuple(self.levels)
        if not levels:
            raise ValueError("a hierarchy needs at least one level")
        for t, part in enumerate(levels, start=1):
            if part.k != t:
                raise ValueError(f"level {t} has {part.k} blocks, expected {t}")
        if len(set(centers)) != len(centers):
            raise ValueError("centers must be distinct")
        if centers and len(centers) != len(levels):
            raise ValueError("need one center per level")
        costs = self.costs
        if costs is not None:
            costs = tuple(float(c) for c in costs)
            if len(costs) != len(levels):
                raise ValueError("need one cost per level")
        object.__setattr__(self, "centers", centers)
        object.__setattr__(self, "levels", levels)
        object.__setattr__(self, "costs", costs)

    @property
    def n_levels(self) -> int:
        return len(self.levels)

    def level(self, k: int) -> Partition:
        if not 1 <= k <= len(self.levels):
            raise ValueError(f"level {k} not computed (1..{len(self.levels)})")
        return self.levels[k - 1]


def euclidean_dist(p, q) -> float:
    p = np.asarray(p, dtype=float)
    q = np.asarray(q, dtype=float)
    if p.shape != q.shape:
        raise ValueError(f"dimension mismatch: {p.shape} vs {q.shape}")
    return float(np.linalg.norm(p - q))


def kmedian_cost(dataset: Dataset, centers) -> float:
    """Sum over all points of the distance to the nearest center id."""
    center_ids = list(centers)
    if not center_ids:
        raise ValueError("center set must be nonempty")
    rows = dataset.rows_of(center_ids)
    d = cdist(dataset.points, dataset.points[rows])
    return float(d.min(axis=1).sum())


def opt_kmedian_discrete(dataset: Dataset, k: int, max_n: int = 15):
    """Exhaustive k-median over centers drawn from the dataset itself.

    Returns ``(ids, cost)`` with the lexicographically smallest optimal
    center tuple.  Guarded to small n; raise the guard explicitly if you
    really want a bigger search.
    """
    n = dataset.n
    if n > max_n:
        raise SizeGuardError(f"n={n} exceeds the exhaustive-search guard ({max_n})")
    if not 1 <= k <= n:
        raise ValueError(f"k must be in 1..{n}, got {k}")
    d = cdist(dataset.points, dataset.points)
    id_list = [int(i) for i in dataset.ids]
    best_ids, best_cost = None, math.inf
    for combo in itertools.combinations(range(n), k):
        cost = float(d[:, combo].min(axis=1).sum())
        if cost < best_cost:
            best_cost = cost
            best_ids = tuple(id_list[r] for r in combo)
    return best_ids, best_cost


def distance_extremes(dataset: Dataset):
    """(Dmin, Dmax, Dmax/Dmin) over all point pairs."""
    if dataset.n < 2:
        raise ValueError("need at least two points")
    d = pdist(dataset.points)
    dmin = float(d.min())
    dmax = float(d.max())
    if dmin == 0.0:
        pairs = duplicate_id_pairs(dataset.points, dataset.ids)
        raise DegenerateDataError(f"duplicate points for id pairs {pairs}")
    return dmin, dmax, dmax / dmin


def check_nested(hierarchy) -> tuple:
    """Verify every level refines the previous one by a single binary split.

    Accepts a HierarchicalClustering (or anything with ``.levels``).
    Returns ``(True, None)`` or ``(False, description-of-first-violation)``.
    """
    levels = hierarchy.levels
    prev = None
    for t, part in enumerate(levels, start=1):
        if part.k != t:
            return False, f"level {t}: has {part.k} blocks, expected {t}"
        if prev is not None:
            if part.ground != prev.ground:
                return False, f"level {t}: ground set changed"
            old = set(prev.blocks)
            new = set(part.blocks)
            gone = old - new
            added = new - old
            if len(gone) != 1 or len(added) != 2:
                return (
                    False,
                    f"level {t}: expected one block split in two, saw "
                    f"{len(gone)} removed and {len(added)} added",
                )
            (parent,) = gone
            a, b = added
            if a | b != parent:
                return False, f"level {t}: new blocks do not reassemble the split block"
        prev = part
    return True, None


def partition_kmedian_cost(dataset: Dataset, partition: Partition):
    """Euclidean k-median cost of a partition with per-block optimal medoids.

    Returns ``(cost, medoid_ids)``; the bridge used to score center-free
    clusterings on the same axis as center-based ones.
    """
    total = 0.0
    medoids = []
    for block in partition.sorted_blocks():
        members = sorted(block)
        rows = dataset.rows_of(members)
        d = cdist(dataset.points[rows], dataset.points[rows])
        sums = d.sum(axis=0)
        best = int(np.argmin(sums))
        total += float(sums[best])
        medoids.append(members[best])
    return total, tuple(medoids)
