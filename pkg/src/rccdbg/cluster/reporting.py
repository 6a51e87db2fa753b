"""Inspection-effort and per-parameter variance-reduction reporting."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from rccdbg.cluster.selection import RootCauseCluster

HIGH_REDUCTION = 0.5


def inspection_ratio(num_clusters: int, num_error_images: int,
                     images_per_cluster: int = 5) -> float:
    """Percentage of error-inducing images a reviewer looks at, capped at 100."""
    if num_clusters < 1 or images_per_cluster < 1:
        raise ValueError("cluster counts must be positive")
    if num_error_images < 1:
        raise ValueError("no error images to inspect")
    pct = 100.0 * (images_per_cluster * num_clusters) / num_error_images
    return min(pct, 100.0)


@dataclass(frozen=True)
class VarianceEntry:
    cluster_id: int
    parameter: str
    cluster_variance: float | None
    whole_variance: float | None
    reduction: float | None
    flagged: bool
    applicable: bool


@dataclass
class VarianceReport:
    entries: list[VarianceEntry]

    def for_cluster(self, cluster_id: int) -> list[VarianceEntry]:
        return [e for e in self.entries if e.cluster_id == cluster_id]

    def high_reduction_params(self, cluster_id: int) -> list[str]:
        return [e.parameter for e in self.for_cluster(cluster_id) if e.flagged]


def variance_reduction_report(clusters: list[RootCauseCluster],
                              params: dict[str, dict[str, float]]) -> VarianceReport:
    """reduction(c, p) = 1 - Var_cluster(p) / Var_all(p), population variance.

    `params` maps image_id -> parameter values for the whole baseline set
    (the full test set); every clustered image must appear in it. Entries
    for singleton clusters or zero baseline variance are not applicable.
    """
    if not params:
        raise ValueError("empty parameter table")
    names = sorted(next(iter(params.values())).keys())
    whole = {p: float(np.var([row[p] for row in params.values()])) for p in names}

    entries: list[VarianceEntry] = []
    for cluster in clusters:
        missing = [m for m in cluster.members if m not in params]
        if missing:
            raise ValueError(f"no generation parameters for image {missing[0]!r}")
        for p in names:
            if len(cluster.members) < 2 or whole[p] == 0.0:
                entries.append(VarianceEntry(cluster.cluster_id, p, None, whole[p],
                                             None, False, False))
                continue
            cvar = float(np.var([params[m][p] for m in cluster.members]))
            reduction = 1.0 - cvar / whole[p]
            entries.append(VarianceEntry(cluster.cluster_id, p, cvar, whole[p],
                                         reduction, reduction >= HIGH_REDUCTION, True))
    return VarianceReport(entries=entries)
