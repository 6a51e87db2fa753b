"""Cluster-count selection via the WICD curve, plus best-layer choice.

WICD (weighted intra-cluster distance) is the size-weighted mean of each
cluster's mean pairwise member distance; singletons contribute zero. The
cluster count is the kneedle knee of WICD over the K sweep.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from rccdbg.cluster.distance import DistanceMatrix
from rccdbg.cluster.kneedle import kneedle
from rccdbg.cluster.linkage import Dendrogram, cut, hac_average_linkage

DEFAULT_K_MAX = 100


@dataclass
class RootCauseCluster:
    cluster_id: int
    members: list[str]
    medoid: str
    mean_pairwise_distance: float
    assignment_threshold: float | None = None


@dataclass
class ClusteringResult:
    layer_index: int
    k: int
    assignment: dict[str, int]
    wicd_curve: list[tuple[int, float]]
    chosen_wicd: float
    weak_knee: bool
    clusters: list[RootCauseCluster] = field(default_factory=list)


def _cluster_mpd(d: np.ndarray, idx: np.ndarray) -> float:
    s = len(idx)
    if s < 2:
        return 0.0
    return float(d[np.ix_(idx, idx)].sum() / (s * (s - 1)))


def mean_pairwise_distance(dm: DistanceMatrix) -> float:
    n = dm.n
    return float(dm.d.sum() / (n * (n - 1)))


def wicd(labels: np.ndarray, dm: DistanceMatrix) -> float:
    """Size-weighted mean intra-cluster pairwise distance for a labelling."""
    n = dm.n
    if len(labels) != n:
        raise ValueError("assignment must cover every image")
    total = 0.0
    for c in np.unique(labels):
        idx = np.flatnonzero(labels == c)
        total += (len(idx) / n) * _cluster_mpd(dm.d, idx)
    return total


def _medoid(d: np.ndarray, idx: np.ndarray) -> int:
    sums = d[np.ix_(idx, idx)].sum(axis=1)
    return int(idx[int(np.argmin(sums))])


def _build_clusters(dm: DistanceMatrix, labels: np.ndarray) -> list[RootCauseCluster]:
    clusters = []
    for c in sorted(np.unique(labels)):
        idx = np.flatnonzero(labels == c)
        clusters.append(RootCauseCluster(
            cluster_id=int(c),
            members=[dm.ids[i] for i in idx],
            medoid=dm.ids[_medoid(dm.d, idx)],
            mean_pairwise_distance=_cluster_mpd(dm.d, idx)))
    return clusters


def select_clusters(dm: DistanceMatrix, k_min: int = 2, k_max: int | None = None,
                    sensitivity: float = 1.0, layer_index: int = -1,
                    dendrogram: Dendrogram | None = None) -> ClusteringResult:
    """Sweep K over [k_min, k_max], score with WICD, pick the kneedle knee.

    Sweeps shorter than 3 points cannot feed kneedle and fall back to
    K = k_min with the weak-knee flag set.
    """
    n = dm.n
    if k_max is None:
        k_max = min(n - 1, DEFAULT_K_MAX)
    k_max = min(k_max, n - 1)
    if not 2 <= k_min <= k_max:
        raise ValueError(f"invalid K range [{k_min}, {k_max}] for n={n}")

    if dendrogram is None:
        dendrogram = hac_average_linkage(dm)
    ks = list(range(k_min, k_max + 1))
    labellings = {k: cut(dendrogram, k) for k in ks}
    curve = [(k, wicd(labellings[k], dm)) for k in ks]

    if len(ks) < 3:
        chosen_k, weak = k_min, True
    else:
        knee = kneedle([float(k) for k in ks], [w for _, w in curve], sensitivity)
        chosen_k, weak = int(knee.x), knee.weak

    labels = labellings[chosen_k]
    chosen_wicd = dict(curve)[chosen_k]
    assignment = {dm.ids[i]: int(labels[i]) for i in range(n)}
    return ClusteringResult(layer_index=layer_index, k=chosen_k, assignment=assignment,
                            wicd_curve=curve, chosen_wicd=chosen_wicd, weak_knee=weak,
                            clusters=_build_clusters(dm, labels))


def select_best_layer(results: dict[int, ClusteringResult],
                      dms: dict[int, DistanceMatrix]) -> int:
    """Layer minimizing chosen WICD normalized by the matrix's overall mean
    pairwise distance; ties go to the deepest layer."""
    if not results:
        raise ValueError("no layer results")
    best_layer, best_score = None, None
    for layer in sorted(results):
        overall = mean_pairwise_distance(dms[layer])
        score = np.inf if overall == 0 else results[layer].chosen_wicd / overall
        # <= keeps the deepest layer on ties (layers scanned ascending)
        if best_score is None or score <= best_score:
            best_layer, best_score = layer, score
    return best_layer
