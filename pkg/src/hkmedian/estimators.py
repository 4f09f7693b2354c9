"""Scikit-learn style estimators wrapping the hierarchical algorithms.

All estimators compute a hierarchy on ``fit(X)`` and expose the usual
clustering surface (``labels_``, ``fit_predict``, ``get_params``/``clone``)
plus ``level_partition(k)`` / ``level_labels(k)`` for reading any level of
the nested sequence.  The sensitivity harness drives them through exactly
this surface.
"""

from __future__ import annotations

import numpy as np
from sklearn.base import BaseEstimator, ClusterMixin
from sklearn.utils import check_array

from .core import Dataset, Partition
from .hierarchy import tree_kmedian_pipeline
from .linkage import LINKAGE_KINDS, agglomerate


class _BaseHierarchy(BaseEstimator, ClusterMixin):
    def _check_fit_input(self, X) -> Dataset:
        X = check_array(X, dtype=np.float64, ensure_min_samples=1)
        if not isinstance(self.n_clusters, (int, np.integer)) or self.n_clusters < 1:
            raise ValueError(f"n_clusters must be a positive integer, got {self.n_clusters!r}")
        if self.n_clusters > X.shape[0]:
            raise ValueError(f"n_clusters={self.n_clusters} exceeds n_samples={X.shape[0]}")
        self.n_features_in_ = X.shape[1]
        return Dataset.from_points(X)

    def level_partition(self, k: int) -> Partition:
        """Partition with k blocks, over row indices of the fitted X."""
        raise NotImplementedError

    def level_labels(self, k: int) -> np.ndarray:
        part = self.level_partition(k)
        return part.labels(range(self._n_samples))

    def is_deterministic(self) -> bool:
        return True

    def fit_predict(self, X, y=None):
        return self.fit(X).labels_


class _TreeHierarchy(_BaseHierarchy):
    _mode = None

    def _resolved_levels(self, n: int) -> int:
        if self.max_levels is None:
            return n
        if not isinstance(self.max_levels, (int, np.integer)) or self.max_levels < 1:
            raise ValueError(f"max_levels must be a positive integer, got {self.max_levels!r}")
        return min(max(int(self.max_levels), self.n_clusters), n)

    def _pipeline_kwargs(self) -> dict:
        raise NotImplementedError

    def fit(self, X, y=None):
        dataset = self._check_fit_input(X)
        self._n_samples = dataset.n
        result = tree_kmedian_pipeline(
            dataset, max_levels=self._resolved_levels(dataset.n), **self._pipeline_kwargs()
        )
        self.hierarchy_ = result.hierarchy
        self.tree_ = result.tree
        self.centers_ = np.asarray(result.hierarchy.centers, dtype=np.int64)
        self.tree_costs_ = np.asarray(result.hierarchy.costs, dtype=float)
        self.euclidean_costs_ = np.asarray(result.euclidean_costs, dtype=float)
        self.n_levels_ = result.hierarchy.n_levels
        self.labels_ = self.level_labels(self.n_clusters)
        return self

    def level_partition(self, k: int) -> Partition:
        return self.hierarchy_.level(k)


class GreedyHierarchicalKMedian(_TreeHierarchy):
    """Tree-embedding greedy hierarchical k-median.

    Embeds the points in a randomly shifted quadtree metric and picks each
    center greedily to minimize the tree k-median cost.  With
    ``shift="none"`` the whole run is deterministic.

    Parameters
    ----------
    n_clusters : level exposed through ``labels_``.
    shift : "random" (one uniform shift of the grid) or "none".
    max_levels : compute only the first ``max_levels`` levels (None = all).
    random_state : seed for the shift; ignored when ``shift="none"``.
    """

    def __init__(self, n_clusters=2, shift="random", max_levels=None, random_state=None):
        self.n_clusters = n_clusters
        self.shift = shift
        self.max_levels = max_levels
        self.random_state = random_state

    def _pipeline_kwargs(self):
        if self.shift not in ("random", "none"):
            raise ValueError(f"shift must be 'random' or 'none', got {self.shift!r}")
        return {
            "mode": "greedy",
            "shift": self.shift,
            "rng": np.random.default_rng(self.random_state),
        }

    def is_deterministic(self) -> bool:
        return self.shift == "none" or self.random_state is not None


class StableHierarchicalKMedian(_TreeHierarchy):
    """Low-sensitivity hierarchical k-median.

    Same embedding as the greedy variant, but each center is drawn with
    probability proportional to ``exp(-cost / lam)`` where ``lam`` is
    resampled per round from an epsilon-controlled interval.  Larger epsilon
    trades clustering cost for stability under point deletions.

    Parameters
    ----------
    n_clusters : level exposed through ``labels_``.
    epsilon : positive smoothing strength.
    max_levels : compute only the first ``max_levels`` levels (None = all).
    random_state : seed making the run reproducible.
    """

    def __init__(self, n_clusters=2, epsilon=1.0, max_levels=None, random_state=None):
        self.n_clusters = n_clusters
        self.epsilon = epsilon
        self.max_levels = max_levels
        self.random_state = random_state

    def _pipeline_kwargs(self):
        if not isinstance(self.epsilon, (int, float, np.floating)) or not self.epsilon > 0:
            raise ValueError(f"epsilon must be positive, got {self.epsilon!r}")
        return {
            "mode": "stable",
            "epsilon": float(self.epsilon),
            "shift": "random",
            "rng": np.random.default_rng(self.random_state),
        }

    def is_deterministic(self) -> bool:
        return self.random_state is not None


class AgglomerativeLinkage(_BaseHierarchy):
    """Bottom-up merging under single, complete, average, or Ward linkage.

    Always computes the full dendrogram; any level can be read back with
    ``level_partition``/``level_labels``.
    """

    def __init__(self, n_clusters=2, linkage="single"):
        self.n_clusters = n_clusters
        self.linkage = linkage

    def fit(self, X, y=None):
        if self.linkage not in LINKAGE_KINDS:
            raise ValueError(f"linkage must be one of {LINKAGE_KINDS}, got {self.linkage!r}")
        dataset = self._check_fit_input(X)
        self._n_samples = dataset.n
        self.dendrogram_ = agglomerate(dataset, self.linkage)
        self.n_levels_ = dataset.n
        self.labels_ = self.level_labels(self.n_clusters)
        return self

    def level_partition(self, k: int) -> Partition:
        return self.dendrogram_.cut(k)


ALGORITHM_NAMES = (
    "stable",
    "clnss-greedy",
    "clnss-deterministic",
    "single",
    "complete",
    "average",
    "ward",
)


def make_estimator(name, n_clusters=2, epsilon=1.0, max_levels=None, random_state=None):
    """Estimator for one of the named algorithm variants."""
    if name == "stable":
        return StableHierarchicalKMedian(
            n_clusters=n_clusters, epsilon=epsilon, max_levels=max_levels, random_state=random_state
        )
    if name == "clnss-greedy":
        return GreedyHierarchicalKMedian(
            n_clusters=n_clusters, shift="random", max_levels=max_levels, random_state=random_state
        )
    if name == "clnss-deterministic":
        return GreedyHierarchicalKMedian(
            n_clusters=n_clusters, shift="none", max_levels=max_levels, random_state=random_state
        )
    if name in LINKAGE_KINDS:
        return AgglomerativeLinkage(n_clusters=n_clusters, linkage=name)
    raise ValueError(f"unknown algorithm {name!r}; choose from {ALGORITHM_NAMES}")
