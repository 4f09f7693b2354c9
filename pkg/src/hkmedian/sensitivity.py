"""Partition distance and the deletion-stability harness.

The distance between two clusterings is the minimum over block matchings of
the total symmetric difference, with the smaller side padded by empty
blocks.  Stability of an algorithm is the mean of that distance between its
output on the full data and on data with points deleted:

* :func:`avg_sensitivity_exact` enumerates every single-point deletion and
  requires a deterministic estimator.
* :func:`avg_sensitivity_empirical` samples deletions and runs the original
  and perturbed fits under the same derived random stream, which upper
  bounds the distributional sensitivity of randomized algorithms.

Stream derivation is stateless and documented: for master seed ``s`` and
trial ``j``, deletions are drawn from ``SeedSequence(s, spawn_key=(j, 0))``
and both fits of the trial are seeded with ``SeedSequence(s, spawn_key=(j, 1))``.
Trials are therefore independent and safe to fan out to worker processes.
"""

from __future__ import annotations

import itertools
import json
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass

import numpy as np
from scipy.optimize import linear_sum_assignment
from sklearn.base import clone

from .core import Partition


def _sym_diff_matrix(a: Partition, b: Partition) -> np.ndarray:
    ka, kb = a.k, b.k
    size = max(ka, kb)
    cost = np.zeros((size, size), dtype=np.int64)
    blocks_a = a.sorted_blocks()
    blocks_b = b.sorted_blocks()
    for i in range(size):
        for j in range(size):
            if i < ka and j < kb:
                ai, bj = blocks_a[i], blocks_b[j]
                cost[i, j] = len(ai) + len(bj) - 2 * len(ai & bj)
            elif i < ka:
                cost[i, j] = len(blocks_a[i])
            elif j < kb:
                cost[i, j] = len(blocks_b[j])
    return cost


def partition_distance(a: Partition, b: Partition) -> int:
    """Minimum total symmetric difference over padded block bijections."""
    cost = _sym_diff_matrix(a, b)
    rows, cols = linear_sum_assignment(cost)
    return int(cost[rows, cols].sum())


def partition_distance_bruteforce(a: Partition, b: Partition, max_blocks: int = 8) -> int:
    """Exhaustive matching over all padded bijections; oracle for the solver."""
    if max(a.k, b.k) > max_blocks:
        raise ValueError(f"brute force limited to {max_blocks} blocks")
    cost = _sym_diff_matrix(a, b)
    size = cost.shape[0]
    best = None
    for perm in itertools.permutations(range(size)):
        total = sum(cost[i, perm[i]] for i in range(size))
        if best is None or total < best:
            best = total
    return int(best)


@dataclass(frozen=True)
class DeletionSchedule:
    """How points are removed per trial.

    Modes: ``single-point-all`` (one trial per point, deterministic),
    ``random-count`` (delete ``amount`` uniformly random points), and
    ``random-fraction`` (delete ``round(amount * n)``, at least one).
    """

    mode: str
    amount: float = None
    trials: int = None

    def __post_init__(self):
        if self.mode == "single-point-all":
            if self.amount is not None or self.trials is not None:
                raise ValueError("single-point-all takes no amount or trial count")
        elif self.mode == "random-count":
            if not (isinstance(self.amount, (int, np.integer)) and self.amount >= 1):
                raise ValueError("random-count needs an integer amount >= 1")
            if not (isinstance(self.trials, (int, np.integer)) and self.trials >= 1):
                raise ValueError("need trials >= 1")
        elif self.mode == "random-fraction":
            if not (0.0 < float(self.amount) < 1.0):
                raise ValueError("fraction must lie in (0, 1)")
            if not (isinstance(self.trials, (int, np.integer)) and self.trials >= 1):
                raise ValueError("need trials >= 1")
        else:
            raise ValueError(f"unknown schedule mode {self.mode!r}")

    @classmethod
    def single_point_all(cls) -> "DeletionSchedule":
        return cls("single-point-all")

    @classmethod
    def random_count(cls, amount: int, trials: int) -> "DeletionSchedule":
        return cls("random-count", amount, trials)

    @classmethod
    def random_fraction(cls, fraction: float, trials: int) -> "DeletionSchedule":
        return cls("random-fraction", fraction, trials)

    def n_trials(self, n: int) -> int:
        return n if self.mode == "single-point-all" else int(self.trials)

    def deletion_size(self, n: int) -> int:
        if self.mode == "single-point-all":
            return 1
        if self.mode == "random-count":
            size = int(self.amount)
        else:
            size = max(1, round(float(self.amount) * n))
        if size >= n:
            raise ValueError(f"schedule would delete {size} of {n} points")
        return size

    def draw(self, trial: int, ids: np.ndarray, rng) -> np.ndarray:
        if self.mode == "single-point-all":
            return ids[trial : trial + 1]
        size = self.deletion_size(len(ids))
        return np.sort(rng.choice(ids, size=size, replace=False))

    def describe(self) -> dict:
        out = {"mode": self.mode}
        if self.amount is not None:
            out["amount"] = self.amount
        if self.trials is not None:
            out["trials"] = self.trials
        return out


@dataclass(frozen=True)
class SensitivityReport:
    """Per-deletion partition distances plus run metadata."""

    algorithm: str
    k: int
    params: dict
    master_seed: object
    schedule: dict
    deleted: tuple
    distances: tuple
    mean: float
    stddev: float

    @classmethod
    def from_runs(cls, algorithm, k, params, master_seed, schedule, deleted, distances):
        arr = np.asarray(distances, dtype=float)
        return cls(
            algorithm=algorithm,
            k=int(k),
            params=dict(params),
            master_seed=master_seed,
            schedule=schedule,
            deleted=tuple(tuple(int(x) for x in d) for d in deleted),
            distances=tuple(float(x) for x in arr),
            mean=float(arr.mean()),
            stddev=float(arr.std()),
        )

    def csv_rows(self):
        yield ("trial", "deleted_ids", "distance")
        for t, (gone, dist) in enumerate(zip(self.deleted, self.distances)):
            yield (t, ";".join(str(g) for g in gone), dist)

    def summary(self) -> dict:
        return {
            "algorithm": self.algorithm,
            "k": self.k,
            "params": self.params,
            "master_seed": self.master_seed,
            "schedule": self.schedule,
            "n_trials": len(self.distances),
            "mean": self.mean,
            "stddev": self.stddev,
        }

    def to_json(self) -> str:
        return json.dumps(self.summary(), sort_keys=True)


def _estimator_name(estimator) -> str:
    return type(estimator).__name__


def _estimator_params(estimator) -> dict:
    out = {}
    for key, value in estimator.get_params().items():
        if isinstance(value, (str, int, float, bool)) or value is None:
            out[key] = value
        else:
            out[key] = repr(value)
    return out


def _is_deterministic(estimator) -> bool:
    probe = getattr(estimator, "is_deterministic", None)
    return bool(probe()) if callable(probe) else True


def _fit_partitions(estimator, points: np.ndarray, orig_ids: np.ndarray, ks, seed) -> dict:
    """Fit a clone on the given rows and return per-k partitions over the
    original ids."""
    est = clone(estimator)
    params = est.get_params()
    updates = {}
    if "random_state" in params and seed is not None:
        updates["random_state"] = seed
    if "n_clusters" in params:
        updates["n_clusters"] = min(max(ks), points.shape[0])
    if "max_levels" in params:
        updates["max_levels"] = max(ks)
    if updates:
        est.set_params(**updates)
    est.fit(points)
    out = {}
    for k in ks:
        part = est.level_partition(k)
        out[k] = Partition(tuple(frozenset(int(orig_ids[r]) for r in block) for block in part.blocks))
    return out


def _run_trial(estimator, points, ids, ks, deleted, seed) -> dict:
    base = _fit_partitions(estimator, points, ids, ks, seed)
    keep = ~np.isin(ids, deleted)
    pert = _fit_partitions(estimator, points[keep], ids[keep], ks, seed)
    return {k: partition_distance(base[k], pert[k]) for k in ks}


def _validate_ks(ks, n_after_deletion: int):
    ks = sorted({int(k) for k in ks})
    if not ks or ks[0] < 1:
        raise ValueError("k must be >= 1")
    if ks[-1] > n_after_deletion:
        raise ValueError(
            f"k={ks[-1]} exceeds the {n_after_deletion} points left after deletion"
        )
    return ks


def sensitivity_sweep(
    estimator,
    points,
    ks,
    schedule: DeletionSchedule,
    master_seed: int = 0,
    workers: int = 1,
) -> dict:
    """Shared-seed sensitivity at every requested k, reusing each trial's
    pair of fits across the whole k range.  Returns {k: SensitivityReport}."""
    points = np.asarray(points, dtype=float)
    if points.ndim == 1:
        points = points[:, None]
    n = points.shape[0]
    ids = np.arange(n, dtype=np.int64)
    ks = _validate_ks(ks, n - schedule.deletion_size(n))
    trials = schedule.n_trials(n)

    jobs = []
    for j in range(trials):
        del_rng = np.random.default_rng(np.random.SeedSequence(master_seed, spawn_key=(j, 0)))
        deleted = schedule.draw(j, ids, del_rng)
        fit_seed = np.random.SeedSequence(master_seed, spawn_key=(j, 1))
        jobs.append((deleted, fit_seed))

    results = [None] * trials
    if workers > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            futures = [
                pool.submit(_run_trial, estimator, points, ids, ks, deleted, seed)
                for deleted, seed in jobs
            ]
            for j, fut in enumerate(futures):
                results[j] = fut.result()
    else:
        for j, (deleted, seed) in enumerate(jobs):
            results[j] = _run_trial(estimator, points, ids, ks, deleted, seed)

    reports = {}
    for k in ks:
        reports[k] = SensitivityReport.from_runs(
            _estimator_name(estimator),
            k,
            _estimator_params(estimator),
            master_seed,
            schedule.describe(),
            [deleted for deleted, _ in jobs],
            [results[j][k] for j in range(trials)],
        )
    return reports


def avg_sensitivity_empirical(
    estimator, points, k: int, schedule: DeletionSchedule, master_seed: int = 0, workers: int = 1
) -> SensitivityReport:
    """Shared-seed empirical average sensitivity at one level."""
    return sensitivity_sweep(estimator, points, [k], schedule, master_seed, workers)[int(k)]


def exact_sweep(estimator, points, ks) -> dict:
    """Deterministic average sensitivity over every single-point deletion."""
    if not _is_deterministic(estimator):
        raise ValueError(
            "exact sensitivity needs a deterministic estimator; fix its "
            "random_state or use a shift-free variant"
        )
    points = np.asarray(points, dtype=float)
    if points.ndim == 1:
        points = points[:, None]
    n = points.shape[0]
    ids = np.arange(n, dtype=np.int64)
    ks = _validate_ks(ks, n - 1)
    base = _fit_partitions(estimator, points, ids, ks, None)
    deleted = []
    distances = {k: [] for k in ks}
    for i in range(n):
        keep = ids != i
        pert = _fit_partitions(estimator, points[keep], ids[keep], ks, None)
        deleted.append((i,))
        for k in ks:
            distances[k].append(partition_distance(base[k], pert[k]))
    return {
        k: SensitivityReport.from_runs(
            _estimator_name(estimator),
            k,
            _estimator_params(estimator),
            None,
            DeletionSchedule.single_point_all().describe(),
            deleted,
            distances[k],
        )
        for k in ks
    }


def avg_sensitivity_exact(estimator, points, k: int) -> SensitivityReport:
    """Exact average sensitivity (Eq.-style enumeration) at one level."""
    return exact_sweep(estimator, points, [k])[int(k)]
