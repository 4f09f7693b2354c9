"""Hierarchical k-median clustering with a low-sensitivity tree algorithm,
agglomerative baselines, and a deletion-stability measurement harness."""

from .core import (
    Dataset,
    DegenerateDataError,
    HierarchicalClustering,
    Partition,
    SizeGuardError,
    check_nested,
    distance_extremes,
    euclidean_dist,
    kmedian_cost,
    opt_kmedian_discrete,
    partition_kmedian_cost,
)
from .datasets import (
    DataFormatError,
    DbscanParams,
    WellClusterabilityReport,
    check_well_clusterable,
    dbscan,
    gen_line_instance,
    gen_random_points,
    gen_rhst_adversarial,
    gen_well_clusterable,
    load_csv,
    mst_max_edge,
    save_csv,
)
from .estimators import (
    ALGORITHM_NAMES,
    AgglomerativeLinkage,
    GreedyHierarchicalKMedian,
    StableHierarchicalKMedian,
    make_estimator,
)
from .hierarchy import (
    TreeRunResult,
    exp_mechanism_sample,
    greedy_hierarchical,
    stable_hierarchical,
    tree_kmedian_pipeline,
)
from .linkage import Dendrogram, agglomerate, cut, linkage_cost
from .rhst import Rhst, construct_2rhst, normalize, random_shift, tree_cost, tree_dist
from .sensitivity import (
    DeletionSchedule,
    SensitivityReport,
    avg_sensitivity_empirical,
    avg_sensitivity_exact,
    exact_sweep,
    partition_distance,
    partition_distance_bruteforce,
    sensitivity_sweep,
)

__all__ = [
    "ALGORITHM_NAMES",
    "AgglomerativeLinkage",
    "DataFormatError",
    "Dataset",
    "DbscanParams",
    "DegenerateDataError",
    "DeletionSchedule",
    "Dendrogram",
    "GreedyHierarchicalKMedian",
    "HierarchicalClustering",
    "Partition",
    "Rhst",
    "SensitivityReport",
    "SizeGuardError",
    "StableHierarchicalKMedian",
    "TreeRunResult",
    "WellClusterabilityReport",
    "agglomerate",
    "avg_sensitivity_empirical",
    "avg_sensitivity_exact",
    "check_nested",
    "check_well_clusterable",
    "construct_2rhst",
    "cut",
    "dbscan",
    "distance_extremes",
    "euclidean_dist",
    "exact_sweep",
    "exp_mechanism_sample",
    "gen_line_instance",
    "gen_random_points",
    "gen_rhst_adversarial",
    "gen_well_clusterable",
    "greedy_hierarchical",
    "kmedian_cost",
    "linkage_cost",
    "load_csv",
    "make_estimator",
    "mst_max_edge",
    "normalize",
    "opt_kmedian_discrete",
    "partition_distance",
    "partition_distance_bruteforce",
    "partition_kmedian_cost",
    "random_shift",
    "save_csv",
    "sensitivity_sweep",
    "stable_hierarchical",
    "tree_cost",
    "tree_dist",
    "tree_kmedian_pipeline",
]

__version__ = "0.1.0"
