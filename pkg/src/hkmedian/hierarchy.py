"""Tree-based hierarchical k-median: exact greedy selection and the smoothed
exponential-mechanism variant, plus the end-to-end embedding pipeline.

Both algorithms pick one center per round; the point's cluster is the closest
selected center, where ties keep the incumbent.  The strict-improvement rule
is what guarantees each level splits exactly one block of the previous level
into two nonempty parts.

Randomness is consumed in a fixed order so shared-seed runs stay coupled:
the shift vector first (d uniforms), then per round one integer (the
selection key) and one uniform (the smoothing scale).  Selections are drawn
by Gumbel-max with the Gumbel noise derived from (round key, point id), so
two runs under the same seed make identical choices unless the deletion
actually reorders the top candidates; the per-run distribution is exactly
the exponential mechanism either way.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .core import Dataset, HierarchicalClustering, Partition, kmedian_cost
from .rhst import Rhst, construct_2rhst, normalize, random_shift

def _splitmix64(x: np.ndarray) -> np.ndarray:
    z = x + np.uint64(0x9E3779B97F4A7C15)
    z = (z ^ (z >> np.uint64(30))) * np.uint64(0xBF58476D1CE4E5B9)
    z = (z ^ (z >> np.uint64(27))) * np.uint64(0x94D049BB133111EB)
    return z ^ (z >> np.uint64(31))


def _keyed_gumbel(key: int, point_keys: np.ndarray) -> np.ndarray:
    """One Gumbel draw per point, a pure function of (key, point key)."""
    mixed = _splitmix64(np.uint64(key) ^ _splitmix64(point_keys))
    u = (mixed >> np.uint64(11)).astype(float) * (2.0 ** -53) + 2.0 ** -54
    return -np.log(-np.log(u))


def point_content_keys(points: np.ndarray) -> np.ndarray:
    """uint64 key per point hashed from its coordinate bits.

    Identical coordinates give identical keys, so a point keeps its key when
    other points are deleted; this is what lets shared-seed runs on the full
    and perturbed data reuse the same selection noise per point.
    """
    bits = np.ascontiguousarray(points, dtype=np.float64).view(np.uint64)
    keys = np.zeros(bits.shape[0], dtype=np.uint64)
    for col in range(bits.shape[1]):
        salt = np.uint64((0xD6E8FEB86659FD93 * (col + 1)) & 0xFFFFFFFFFFFFFFFF)
        keys = _splitmix64(keys ^ _splitmix64(bits[:, col] ^ salt))
    return keys


def exp_mechanism_sample(costs, lam: float, rng) -> int:
    """Draw an index with probability proportional to exp(-costs[i] / lam).

    The minimum cost is subtracted before exponentiating; the distribution
    is invariant under that shift, so this is numerically safe and exact.
    One uniform is consumed per call (inverse-CDF sampling over the given
    index order, which keeps shared-seed runs aligned).
    """
    costs = np.asarray(costs, dtype=float)
    if costs.size == 0:
        raise ValueError("costs must be nonempty")
    if not np.all(np.isfinite(costs)):
        raise ValueError("costs must be finite")
    if not lam > 0:
        raise ValueError("lam must be positive")
    rng = np.random.default_rng(rng)
    weights = np.exp(-(costs - costs.min()) / lam)
    cdf = np.cumsum(weights)
    u = rng.random() * cdf[-1]
    return int(min(np.searchsorted(cdf, u, side="right"), costs.size - 1))


def _finish_round(tree, dataset_ids, c_row, dist_row, cur, assign, levels, claimed):
    """Label the subtree the new center captures and record the partition.

    The labelled node is the highest ancestor of the center whose subtree
    held no previous center; exactly the points under it move (their
    distance to the new center strictly improves, nobody else's does), so
    every level splits one block in two and each block is the set of points
    whose lowest labelled ancestor carries its center.
    """
    c_id = int(dataset_ids[c_row])
    path = []
    node = tree.leaf_of[c_id]
    while node is not None:
        path.append(node)
        node = node.parent
    for node in reversed(path):  # from the root down
        if id(node) not in claimed:
            node.label = c_id
            break
    claimed.update(id(node) for node in path)
    improves = dist_row < cur
    assign[improves] = c_id
    np.minimum(cur, dist_row, out=cur)
    blocks: dict = {}
    for pid, owner in zip(dataset_ids, assign):
        blocks.setdefault(int(owner), set()).add(int(pid))
    levels.append(Partition(tuple(blocks[key] for key in sorted(blocks))))
    return float(cur.sum())


def _run_rounds(tree: Rhst, choose, max_levels, check: bool) -> HierarchicalClustering:
    d = tree.distance_matrix()
    n = tree.n
    ids = tree.ids
    rounds = n if max_levels is None else min(int(max_levels), n)
    if rounds < 1:
        raise ValueError("need at least one level")
    tree.clear_labels()
    cur = np.full(n, np.inf)
    assign = np.full(n, -1, dtype=np.int64)
    chosen = np.zeros(n, dtype=bool)
    claimed: set = set()
    chosen_rows: list = []
    centers: list = []
    levels: list = []
    costs: list = []
    for _ in range(rounds):
        cand = np.minimum(d, cur[None, :]).sum(axis=1)
        c_row = choose(cand, chosen)
        chosen[c_row] = True
        chosen_rows.append(c_row)
        centers.append(int(ids[c_row]))
        costs.append(_finish_round(tree, ids, c_row, d[c_row], cur, assign, levels, claimed))
        if check:
            recomputed = d[:, chosen_rows].min(axis=1)
            if not np.allclose(cur, recomputed, atol=1e-9, rtol=0.0):
                raise AssertionError("incremental assignment costs drifted from scratch recomputation")
            _check_blocks_match_labels(tree, levels[-1])
    return HierarchicalClustering(tuple(centers), tuple(levels), tuple(costs), cost_kind="tree")


def _check_blocks_match_labels(tree, partition):
    for block in partition.blocks:
        owners = set()
        for pid in block:
            node = tree.leaf_of[pid]
            while node.label is None:
                node = node.parent
            owners.add(node.label)
        if len(owners) != 1:
            raise AssertionError(f"block spans labels {sorted(owners)}")


def greedy_hierarchical(tree: Rhst, max_levels=None, check: bool = False) -> HierarchicalClustering:
    """Exact greedy: each round picks the point minimizing the tree k-median
    cost given the centers so far (smallest id on exact ties)."""

    def choose(cand, chosen):
        return int(np.argmin(cand))

    return _run_rounds(tree, choose, max_levels, check)


def stable_hierarchical(
    tree: Rhst, epsilon: float, rng, max_levels=None, check: bool = False, point_keys=None
) -> HierarchicalClustering:
    """Smoothed greedy: per round, sample the center with probability
    proportional to exp(-cost / lam), lam drawn uniformly from
    [eps*C/(6 ln n), eps*C/(3 ln n)] where C is the round's best achievable
    cost.  Already-chosen points never win (they are excluded from the draw,
    which equals rejecting and redrawing them).  Fully reproducible from the
    stream; ``point_keys`` carries the per-point selection-noise keys (by
    default hashed from the embedded coordinates)."""
    if not epsilon > 0:
        raise ValueError("epsilon must be positive")
    rng = np.random.default_rng(rng)
    if tree.n == 1:
        return greedy_hierarchical(tree, max_levels, check)
    log_n = math.log(tree.n)
    if point_keys is None:
        point_keys = point_content_keys(tree.points)
    point_keys = np.asarray(point_keys, dtype=np.uint64)
    if point_keys.shape != (tree.n,):
        raise ValueError("need one selection-noise key per point")

    def choose(cand, chosen):
        cbar = float(cand.min())
        key = int(rng.integers(0, 2**63))
        u = rng.random()
        open_rows = np.flatnonzero(~chosen)
        if cbar <= 0.0:
            # Every point already covered at zero cost; the smoothing scale
            # collapses, so fall back to a uniform draw over unchosen points.
            return int(open_rows[int(u * open_rows.size)])
        lo = epsilon * cbar / (6.0 * log_n)
        lam = lo * (1.0 + u)
        # Gumbel-max over the unchosen points: exactly the softmax
        # distribution, with noise keyed by point content so shared-seed
        # runs on original and perturbed data stay aligned.
        gumbel = _keyed_gumbel(key, point_keys[open_rows])
        scores = gumbel - cand[open_rows] / lam
        return int(open_rows[int(np.argmax(scores))])

    return _run_rounds(tree, choose, max_levels, check)


@dataclass(frozen=True)
class TreeRunResult:
    """A pipeline run: the hierarchy (tree costs), the tree it was computed
    on, and the per-level k-median cost of the same centers on the original
    unshifted, unscaled points."""

    hierarchy: HierarchicalClustering
    tree: Rhst
    euclidean_costs: tuple


def tree_kmedian_pipeline(
    dataset: Dataset,
    mode: str = "greedy",
    epsilon: float = None,
    rng=None,
    shift: str = "random",
    max_levels=None,
    check: bool = False,
) -> TreeRunResult:
    """normalize -> shift -> embed -> select centers round by round.

    ``mode="greedy"`` is the deterministic baseline (with ``shift="none"``
    it is fully deterministic); ``mode="stable"`` uses the exponential
    mechanism and requires ``epsilon``.
    """
    if mode not in ("greedy", "stable"):
        raise ValueError(f"unknown mode {mode!r}")
    if mode == "stable" and epsilon is None:
        raise ValueError("stable mode requires epsilon")
    if mode == "greedy" and epsilon is not None:
        raise ValueError("epsilon only applies to stable mode")
    if shift not in ("random", "none"):
        raise ValueError(f"shift must be 'random' or 'none', got {shift!r}")
    rng = np.random.default_rng(rng)

    normalized, info = normalize(dataset)
    if shift == "random":
        shifted, vec = random_shift(normalized, info.aspect, rng)
    else:
        shifted, vec = normalized, np.zeros(dataset.dim)
    tree = construct_2rhst(shifted, shift_vector=vec)
    if mode == "greedy":
        hierarchy = greedy_hierarchical(tree, max_levels, check)
    else:
        # Selection-noise keys come from the raw input coordinates, which are
        # byte-identical for surviving points across a deletion even when the
        # normalization happens to change.
        hierarchy = stable_hierarchical(
            tree, epsilon, rng, max_levels, check, point_keys=point_content_keys(dataset.points)
        )

    cur = np.full(dataset.n, np.inf)
    euclid = []
    for c in hierarchy.centers:
        delta = np.linalg.norm(dataset.points - dataset.coords_of(c), axis=1)
        np.minimum(cur, delta, out=cur)
        euclid.append(float(cur.sum()))
    return TreeRunResult(hierarchy, tree, tuple(euclid))
