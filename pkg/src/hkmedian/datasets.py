"""Instance generators, clusterability checking, density clustering, CSV I/O.

The two hard-instance generators are exact constructions:

* :func:`gen_line_instance` puts n points on a line with gaps d1 then
  1 + (j-1)*d1/n, the family on which single linkage tears badly under a
  single deletion.
* :func:`gen_rhst_adversarial` populates the 16 third-level cells of a
  fixed 64-grid quadtree (tree-order numbering: cells 1-4 in the first
  quadrant, 5-8 in the second, ...).  All cells hold the same number of
  points; cells 5, 11, and 15 differ only in blob tightness (tightest,
  one stray, two strays), which makes the shift-free greedy pick its first
  center in cell 5 and its second in cell 11, while deleting any point of
  cell 5 moves the first two centers to cells 11 and 15.  Margins between
  the competing candidate costs are >= 30 in grid units, far above float
  noise, for every supported n.
"""

from __future__ import annotations

import csv
import json
import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np
from scipy.sparse.csgraph import minimum_spanning_tree
from scipy.spatial.distance import cdist

from .core import Dataset, Partition

_GRID = 64.0  # root-cube side of the adversarial instance
_CELL = 16.0  # third-level cell side
_SUB = 8.0  # cell quarter (one level deeper)
_TIGHT_CELL = 4  # 0-based indices in tree-order numbering: cells 5, 11, 15
_ONE_STRAY_CELL = 10
_TWO_STRAY_CELL = 14


class DataFormatError(ValueError):
    """A data file failed to parse as a rectangular numeric table."""


def gen_line_instance(n: int, d1: float) -> Dataset:
    """Nearly equidistant points on a line: gaps d1, then 1 + (j-1)*d1/n."""
    if n < 2:
        raise ValueError("need n >= 2")
    gaps = [float(d1)] + [1.0 + j * float(d1) / n for j in range(1, n - 1)]
    xs = np.concatenate([[0.0], np.cumsum(gaps)])
    return Dataset.from_points(xs[:, None])


def _cell_corner(cell_idx: int) -> tuple:
    """Lower corner of 0-based cell ``cell_idx`` in tree-order numbering."""
    quad, local = divmod(cell_idx, 4)
    qrow, qcol = divmod(quad, 2)
    crow, ccol = divmod(local, 2)
    return _CELL * (2 * qcol + ccol), _CELL * (2 * qrow + crow)


def _lattice(count: int, ox: float, oy: float) -> list:
    side = math.ceil(math.sqrt(count))
    return [(ox + (j % side), oy + (j // side)) for j in range(count)]


def _blob(cell_idx: int, count: int) -> list:
    ox, oy = _cell_corner(cell_idx)
    if cell_idx == _TIGHT_CELL:
        return _lattice(count, ox, oy)
    if cell_idx == _ONE_STRAY_CELL:
        return _lattice(count - 1, ox, oy) + [(ox + _SUB, oy + _SUB)]
    if cell_idx == _TWO_STRAY_CELL:
        return _lattice(count - 2, ox, oy) + [(ox + _SUB, oy + _SUB), (ox + _SUB + 1, oy + _SUB)]
    # loose: spread across the four cell quarters round-robin
    sizes = [count // 4 + (1 if r < count % 4 else 0) for r in range(4)]
    pts = []
    for quarter, size in enumerate(sizes):
        qx = ox + _SUB * (quarter % 2)
        qy = oy + _SUB * (quarter // 2)
        pts.extend(_lattice(size, qx, qy))
    return pts


def gen_rhst_adversarial(n: int) -> Dataset:
    """Deterministic 2-d instance on which the shift-free tree greedy has
    linear average sensitivity at k=2."""
    if n < 64:
        raise ValueError("need n >= 64 to populate all sixteen cells")
    if n > 1024:
        raise ValueError("the fixed adversarial grid supports n <= 1024")
    base = n // 16
    counts = [base] * 16
    # Remainder points go to plain cells, cycling across quadrants to keep
    # quadrant masses balanced.
    plain_order = [0, 5, 8, 12, 1, 6, 9, 13, 2, 7, 11, 15, 3]
    for r in range(n % 16):
        counts[plain_order[r % len(plain_order)]] += 1
    pts = []
    for cell_idx in range(16):
        pts.extend(_blob(cell_idx, counts[cell_idx]))
    return Dataset.from_points(np.asarray(pts, dtype=float))


def gen_random_points(n: int, d: int = 2, spread: float = 10.0, clusters: int = 0, rng=None) -> Dataset:
    """Duplicate-free random points: uniform in [0, spread]^d, or a mixture
    of ``clusters`` Gaussian blobs with centers uniform in the same box."""
    if n < 2:
        raise ValueError("need n >= 2")
    if not spread > 0:
        raise ValueError("spread must be positive")
    rng = np.random.default_rng(rng)
    for _ in range(100):
        if clusters > 0:
            centers = rng.random((clusters, d)) * spread
            pick = rng.integers(clusters, size=n)
            pts = centers[pick] + rng.normal(0.0, spread * 0.05, size=(n, d))
        else:
            pts = rng.random((n, d)) * spread
        if len(np.unique(pts, axis=0)) == n:
            return Dataset.from_points(pts)
    raise ValueError("could not draw duplicate-free points")


def mst_max_edge(points) -> float:
    """Largest edge weight of a Euclidean minimum spanning tree."""
    pts = np.asarray(points, dtype=float)
    if pts.ndim == 1:
        pts = pts[:, None]
    if pts.shape[0] <= 1:
        return 0.0
    tree = minimum_spanning_tree(cdist(pts, pts))
    return float(tree.data.max())


@dataclass(frozen=True)
class WellClusterabilityReport:
    """Per-cluster MST max edges, pairwise minimum separations, and the
    verdict d(i,j) > 2*max(d_i, d_j) for every pair."""

    max_intra: tuple
    min_inter: tuple  # ((i, j, distance), ...) over i < j
    verdict: bool
    witnesses: tuple  # violating (i, j) pairs

    def nearest_other(self, i: int) -> float:
        vals = [d for a, b, d in self.min_inter if i in (a, b)]
        return min(vals) if vals else math.inf


def check_well_clusterable(dataset: Dataset, partition: Partition) -> WellClusterabilityReport:
    if partition.ground != frozenset(int(i) for i in dataset.ids):
        raise ValueError("partition must cover the whole dataset")
    blocks = partition.sorted_blocks()
    coords = [dataset.points[dataset.rows_of(sorted(b))] for b in blocks]
    max_intra = tuple(mst_max_edge(c) for c in coords)
    min_inter = []
    witnesses = []
    for i in range(len(blocks)):
        for j in range(i + 1, len(blocks)):
            dij = float(cdist(coords[i], coords[j]).min())
            min_inter.append((i, j, dij))
            if not dij > 2.0 * max(max_intra[i], max_intra[j]):
                witnesses.append((i, j))
    return WellClusterabilityReport(max_intra, tuple(min_inter), not witnesses, tuple(witnesses))


def gen_well_clusterable(
    m: int, points_per_cluster: int, separation: float = 2.5, d: int = 2, rng=None
):
    """m bounded uniform blobs spaced so the clusterability verdict holds.

    Redraws until the verdict is true; returns ``(dataset, partition)`` with
    the planted partition in generation order.
    """
    if m < 2:
        raise ValueError("need m >= 2 clusters")
    if points_per_cluster < 1:
        raise ValueError("need at least one point per cluster")
    if separation < 2.5:
        raise ValueError("separation must be at least 2.5")
    rng = np.random.default_rng(rng)
    radius = 1.0
    spacing = separation * 4.0 * radius * math.sqrt(d)
    for _ in range(100):
        # centers on a line with slots shuffled; inter-center gap >= spacing
        slots = rng.permutation(2 * m)[:m]
        picked = np.zeros((m, d))
        picked[:, 0] = slots * spacing
        pts = []
        blocks = []
        next_id = 0
        for c in range(m):
            blob = picked[c] + (rng.random((points_per_cluster, d)) * 2.0 - 1.0) * radius
            pts.append(blob)
            blocks.append(frozenset(range(next_id, next_id + points_per_cluster)))
            next_id += points_per_cluster
        arr = np.vstack(pts)
        if len(np.unique(arr, axis=0)) != len(arr):
            continue
        dataset = Dataset.from_points(arr)
        partition = Partition(tuple(blocks))
        if check_well_clusterable(dataset, partition).verdict:
            return dataset, partition
    raise ValueError("could not satisfy the clusterability geometry; relax the request")


@dataclass(frozen=True)
class DbscanParams:
    eps: float
    min_samples: int

    def __post_init__(self):
        if not self.eps > 0:
            raise ValueError("eps must be positive")
        if self.min_samples < 1:
            raise ValueError("min_samples must be >= 1")


def dbscan(dataset: Dataset, params: DbscanParams):
    """Density clustering; returns ``(partition over core+border, noise ids)``.

    A point is core when it has at least ``min_samples`` neighbors within
    ``eps``, itself included.  Clusters are the connected components of core
    points under eps-reachability; border points attach to the cluster of
    their nearest core neighbor (smallest id on ties), which makes the
    output independent of input order.
    """
    ids = [int(i) for i in dataset.ids]
    n = dataset.n
    d = cdist(dataset.points, dataset.points)
    close = d <= params.eps
    core = close.sum(axis=1) >= params.min_samples
    comp = {}
    for r in range(n):
        if core[r] and r not in comp:
            comp[r] = r
            stack = [r]
            while stack:
                u = stack.pop()
                for v in np.flatnonzero(close[u] & core):
                    if v not in comp:
                        comp[int(v)] = r
                        stack.append(int(v))
    clusters: dict = {}
    noise = set()
    for r in range(n):
        if core[r]:
            clusters.setdefault(comp[r], set()).add(ids[r])
            continue
        near_core = np.flatnonzero(close[r] & core)
        if near_core.size == 0:
            noise.add(ids[r])
            continue
        best = min(near_core, key=lambda c: (d[r, c], ids[c]))
        clusters.setdefault(comp[int(best)], set()).add(ids[r])
    partition = Partition(tuple(clusters[key] for key in sorted(clusters)))
    return partition, frozenset(noise)


def load_csv(path, has_header: bool = False, delimiter: str = ",", scale: bool = False) -> Dataset:
    """Read a rectangular numeric table, one point per row.

    ``scale`` applies per-column min-max scaling (constant columns map
    to 0).  Errors carry row/column positions (1-based, header included).
    """
    rows = []
    width = None
    with open(path, newline="") as handle:
        reader = csv.reader(handle, delimiter=delimiter)
        for lineno, row in enumerate(reader, start=1):
            if not row:
                continue
            if has_header and lineno == 1:
                continue
            if width is None:
                width = len(row)
            elif len(row) != width:
                raise DataFormatError(
                    f"{path}: row {lineno} has {len(row)} columns, expected {width}"
                )
            parsed = []
            for col, cell in enumerate(row, start=1):
                try:
                    parsed.append(float(cell))
                except ValueError:
                    raise DataFormatError(
                        f"{path}: row {lineno}, column {col}: not a number: {cell!r}"
                    ) from None
            rows.append(parsed)
    if not rows:
        raise DataFormatError(f"{path}: no data rows")
    pts = np.asarray(rows, dtype=float)
    if scale:
        lo = pts.min(axis=0)
        span = pts.max(axis=0) - lo
        span[span == 0] = 1.0
        pts = (pts - lo) / span
    return Dataset.from_points(pts)


def save_csv(dataset: Dataset, path, meta: dict = None) -> None:
    """Write points as CSV (full-precision reprs); optional sidecar
    ``<stem>.meta.json`` holding generator name, params, and seed."""
    path = Path(path)
    with open(path, "w", newline="") as handle:
        writer = csv.writer(handle)
        for row in dataset.points:
            writer.writerow([repr(float(x)) for x in row])
    if meta is not None:
        sidecar = path.with_suffix(".meta.json")
        sidecar.write_text(json.dumps(meta, sort_keys=True, indent=2) + "\n")
