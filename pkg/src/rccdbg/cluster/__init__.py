"""Root cause cluster generation: distances, linkage, knee selection, reports."""

from rccdbg.cluster.distance import DistanceMatrix, distance_matrix
from rccdbg.cluster.linkage import Dendrogram, Merge, cut, hac_average_linkage
from rccdbg.cluster.kneedle import KneeResult, kneedle
from rccdbg.cluster.selection import (
    ClusteringResult,
    RootCauseCluster,
    mean_pairwise_distance,
    select_best_layer,
    select_clusters,
    wicd,
)
from rccdbg.cluster.reporting import (
    VarianceEntry,
    VarianceReport,
    inspection_ratio,
    variance_reduction_report,
)

__all__ = [
    "ClusteringResult",
    "Dendrogram",
    "DistanceMatrix",
    "KneeResult",
    "Merge",
    "RootCauseCluster",
    "VarianceEntry",
    "VarianceReport",
    "cut",
    "distance_matrix",
    "hac_average_linkage",
    "inspection_ratio",
    "kneedle",
    "mean_pairwise_distance",
    "select_best_layer",
    "select_clusters",
    "variance_reduction_report",
    "wicd",
]
