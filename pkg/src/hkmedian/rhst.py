"""Randomly shifted quadtree embedding into a balanced tree metric.

Grid conventions, fixed once so every consumer agrees:

* The root cell is anchored at the origin with side ``lam_pow2``, the
  smallest power of two that is >= max(1, largest coordinate).  Anchoring at
  the origin (rather than at the data's corner) is what makes the random
  shift actually move points across cell boundaries.
* Cells are half-open boxes; a coordinate exactly on the top face falls in
  the last cell along that axis.
* Subdivision always reaches unit side.  It continues below unit side only
  while two points share a cell, and every leaf chain is extended so all
  leaves sit at the final level ``depth``.
* The edge between a level-i node and its parent weighs
  ``lam_pow2 * sqrt(d) / 2**i``, so the closed-form distance between leaves
  with lowest common ancestor at level j is
  ``2 * lam_pow2 * sqrt(d) * (2**-j - 2**-depth)``.

Coordinates must be nonnegative; run :func:`normalize` (and optionally
:func:`random_shift`) first, as the pipeline does.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass

import numpy as np

from .core import Dataset, DegenerateDataError, distance_extremes

_MAX_EXTRA_LEVELS = 128


class RhstNode:
    __slots__ = ("level", "origin", "side", "parent", "children", "label", "point_id", "n_leaves")

    def __init__(self, level, origin, side, parent):
        self.level = level
        self.origin = origin
        self.side = side
        self.parent = parent
        self.children = []
        self.label = None
        self.point_id = None
        self.n_leaves = 0


@dataclass
class Rhst:
    """The constructed tree plus the per-level cell codes used for queries."""

    root: RhstNode
    depth: int
    lam: float
    lam_pow2: float
    dim: int
    shift: np.ndarray
    ids: np.ndarray
    points: np.ndarray
    leaf_of: dict
    all_nodes: list
    _codes: list
    _dist: np.ndarray = None

    @property
    def n(self) -> int:
        return len(self.ids)

    def edge_weight(self, level: int) -> float:
        """Weight of the edge between a level-``level`` node and its parent."""
        if not 1 <= level <= self.depth:
            raise ValueError(f"level must be in 1..{self.depth}")
        return self.lam_pow2 * math.sqrt(self.dim) / (2.0 ** level)

    def row_of(self, point_id: int) -> int:
        try:
            return self._row_of[int(point_id)]
        except AttributeError:
            self._row_of = {int(i): r for r, i in enumerate(self.ids)}
            return self._row_of[int(point_id)]

    def clear_labels(self) -> None:
        for node in self.all_nodes:
            node.label = None

    def distance_matrix(self) -> np.ndarray:
        """Pairwise leaf distances, cached; rows follow dataset order."""
        if self._dist is None:
            n = self.n
            lca = np.zeros((n, n), dtype=np.int64)
            for level in range(1, self.depth + 1):
                gid = self._codes[level]
                eq = gid[:, None] == gid[None, :]
                lca[eq] = level
            scale = 2.0 * self.lam_pow2 * math.sqrt(self.dim)
            d = scale * (2.0 ** (-lca.astype(float)) - 2.0 ** (-float(self.depth)))
            np.fill_diagonal(d, 0.0)
            self._dist = d
        return self._dist

    def lca_level(self, p: int, q: int) -> int:
        rp, rq = self.row_of(p), self.row_of(q)
        level = 0
        for i in range(1, self.depth + 1):
            if self._codes[i][rp] != self._codes[i][rq]:
                break
            level = i
        return level

    def to_text(self) -> str:
        lines = []

        def visit(node):
            tag = f"p{node.point_id}" if node.point_id is not None else f"{node.n_leaves} leaves"
            lab = "-" if node.label is None else str(node.label)
            origin = ",".join(repr(float(x)) for x in node.origin)
            lines.append(
                f"{'  ' * node.level}level={node.level} origin=({origin}) "
                f"side={node.side!r} label={lab} [{tag}]"
            )
            for child in sorted(node.children, key=lambda c: tuple(c.origin)):
                visit(child)

        visit(self.root)
        return "\n".join(lines)

    def to_json(self) -> str:
        def encode(node):
            return {
                "level": node.level,
                "origin": [float(x) for x in node.origin],
                "side": float(node.side),
                "label": node.label,
                "point_id": node.point_id,
                "n_leaves": node.n_leaves,
                "children": [
                    encode(c) for c in sorted(node.children, key=lambda c: tuple(c.origin))
                ],
            }

        return json.dumps(encode(self.root), sort_keys=True)


@dataclass(frozen=True)
class NormalizationInfo:
    scale: float
    offset: np.ndarray
    aspect: float


def normalize(dataset: Dataset):
    """Rescale so the minimum pairwise distance is 1 and translate to the
    nonnegative orthant.  Returns the normalized dataset and the applied
    transform (``aspect`` is Dmax/Dmin of the original data)."""
    if dataset.n == 1:
        offset = dataset.points[0].copy()
        pts = dataset.points - offset
        return Dataset(pts, dataset.ids), NormalizationInfo(1.0, offset, 1.0)
    dmin, _, aspect = distance_extremes(dataset)
    pts = dataset.points / dmin
    offset = pts.min(axis=0)
    pts = pts - offset
    return Dataset(pts, dataset.ids), NormalizationInfo(1.0 / dmin, offset, aspect)


def random_shift(dataset: Dataset, lam: float, rng) -> tuple:
    """Translate every point by one shared vector uniform in [0, lam]^d.

    Returns ``(shifted_dataset, shift_vector)``; pairwise distances are
    unchanged.  Consumes exactly ``dim`` uniforms from the stream.
    """
    if lam < 0:
        raise ValueError("lam must be nonnegative")
    rng = np.random.default_rng(rng)
    shift = rng.random(dataset.dim) * lam
    return Dataset(dataset.points + shift, dataset.ids), shift


def construct_2rhst(dataset: Dataset, shift_vector=None) -> Rhst:
    """Build the balanced quadtree embedding of a nonnegative point set."""
    pts = dataset.points
    n, d = pts.shape
    if pts.min() < 0:
        raise ValueError("construct_2rhst expects nonnegative coordinates; normalize first")
    max_coord = float(pts.max())
    lam = max(max_coord, 1.0)
    side = 1.0
    while side < lam:
        side *= 2.0
    base_depth = int(round(math.log2(side)))

    # Per-level group ids: two points share a cell at level i iff their gids
    # match.  Child membership per axis is just "upper half of the current
    # cell", which also clamps top-face coordinates into the last cell.
    gid = np.zeros(n, dtype=np.int64)
    codes = [gid]
    origins = [np.zeros((n, d))]
    cur_origin = np.zeros((n, d))
    cur_side = side
    level = 0
    bit_weights = 1 << np.arange(d, dtype=np.int64)
    while True:
        groups = int(gid.max()) + 1 if n else 0
        if level >= base_depth and groups == n:
            break
        if level - base_depth > _MAX_EXTRA_LEVELS:
            raise DegenerateDataError(
                "points too close to separate within the subdivision budget"
            )
        half = cur_side / 2.0
        bits = (pts >= cur_origin + half).astype(np.int64)
        combined = gid * (1 << d) + bits @ bit_weights
        _, gid = np.unique(combined, return_inverse=True)
        gid = gid.astype(np.int64)
        cur_origin = cur_origin + half * bits
        cur_side = half
        level += 1
        codes.append(gid)
        origins.append(cur_origin.copy())

    depth = level
    nodes_per_level = []
    all_nodes = []
    for i in range(depth + 1):
        gid_i = codes[i]
        uniq, first = np.unique(gid_i, return_index=True)
        counts = np.bincount(gid_i, minlength=len(uniq))
        level_nodes = []
        for g, member in zip(uniq.tolist(), first.tolist()):
            parent = None
            if i > 0:
                parent = nodes_per_level[i - 1][codes[i - 1][member]]
            node = RhstNode(i, origins[i][member].copy(), side / (2.0 ** i), parent)
            node.n_leaves = int(counts[g])
            if parent is not None:
                parent.children.append(node)
            level_nodes.append(node)
            all_nodes.append(node)
        nodes_per_level.append(level_nodes)

    leaf_of = {}
    leaf_gid = codes[depth]
    for row, pid in enumerate(dataset.ids.tolist()):
        leaf = nodes_per_level[depth][leaf_gid[row]]
        leaf.point_id = int(pid)
        leaf_of[int(pid)] = leaf

    if shift_vector is None:
        shift_vector = np.zeros(d)
    return Rhst(
        root=nodes_per_level[0][0],
        depth=depth,
        lam=lam,
        lam_pow2=side,
        dim=d,
        shift=np.asarray(shift_vector, dtype=float),
        ids=dataset.ids.copy(),
        points=pts.copy(),
        leaf_of=leaf_of,
        all_nodes=all_nodes,
        _codes=codes,
    )


def tree_dist(tree: Rhst, p: int, q: int) -> float:
    """Closed-form shortest-path distance between two leaf points."""
    if p == q:
        tree.row_of(p)
        return 0.0
    j = tree.lca_level(p, q)
    scale = 2.0 * tree.lam_pow2 * math.sqrt(tree.dim)
    return scale * (2.0 ** (-j) - 2.0 ** (-tree.depth))


def tree_cost(tree: Rhst, centers) -> float:
    """Sum over all leaves of the tree distance to the nearest center id."""
    center_ids = list(centers)
    if not center_ids:
        raise ValueError("center set must be nonempty")
    rows = [tree.row_of(c) for c in center_ids]
    d = tree.distance_matrix()
    return float(d[:, rows].min(axis=1).sum())
