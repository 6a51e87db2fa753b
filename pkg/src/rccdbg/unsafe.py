"""Improvement-set processing: assignment to clusters, labels, balancing.

An improvement image joins the cluster whose members it is closest to on
average, and only if that distance stays within the cluster's threshold:
the largest member-to-rest mean distance observed on the test set. Labeled
entries are balanced by duplicating members of smaller clusters uniformly
with replacement until all clusters match the largest.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass, replace
from pathlib import Path

import numpy as np

from rccdbg.cluster.distance import DistanceMatrix
from rccdbg.cluster.selection import RootCauseCluster


class LabelFileError(ValueError):
    """Labels file rejected; message carries the offending line number."""


@dataclass(frozen=True)
class UnsafeSetEntry:
    image_id: str
    assigned_cluster: int
    distance: float
    label: str | None = None


@dataclass
class BalancedUnsafeSet:
    rows: list[tuple[str, str, int]]  # (image_id, label, source_cluster)
    target_size: int


def cluster_thresholds(clusters: list[RootCauseCluster],
                       dm: DistanceMatrix) -> dict[int, float]:
    """Per-cluster radius: max over members of the mean distance to the other
    members; singletons get 0 (no observed spread)."""
    index = {image_id: i for i, image_id in enumerate(dm.ids)}
    thresholds: dict[int, float] = {}
    for cluster in clusters:
        idx = np.array([index[m] for m in cluster.members])
        if len(idx) < 2:
            thresholds[cluster.cluster_id] = 0.0
            continue
        sums = dm.d[np.ix_(idx, idx)].sum(axis=1)
        thresholds[cluster.cluster_id] = float((sums / (len(idx) - 1)).max())
    return thresholds


def assign_improvement(improvement_ids: list[str], improvement_vectors: np.ndarray,
                       member_ids: list[str], member_vectors: np.ndarray,
                       clusters: list[RootCauseCluster],
                       thresholds: dict[int, float]) -> list[UnsafeSetEntry]:
    """Assign each improvement image to its argmin-mean-distance cluster,
    keeping it only when within that cluster's threshold. Ties go to the
    lowest cluster id; images may match no cluster at all."""
    improvement_vectors = np.asarray(improvement_vectors, dtype=np.float64)
    member_vectors = np.asarray(member_vectors, dtype=np.float64)
    if improvement_vectors.shape[1] != member_vectors.shape[1]:
        raise ValueError(
            f"heatmap width mismatch: improvement {improvement_vectors.shape[1]} vs "
            f"cluster members {member_vectors.shape[1]} (different layer or model?)")
    member_index = {m: i for i, m in enumerate(member_ids)}

    # cross[i, j] = distance from improvement i to member j
    cross = np.sqrt(
        ((improvement_vectors[:, None, :] - member_vectors[None, :, :]) ** 2).sum(axis=2))

    ordered = sorted(clusters, key=lambda c: c.cluster_id)
    per_cluster = np.stack(
        [cross[:, [member_index[m] for m in c.members]].mean(axis=1) for c in ordered],
        axis=1)

    entries: list[UnsafeSetEntry] = []
    for i, image_id in enumerate(improvement_ids):
        pos = int(np.argmin(per_cluster[i]))  # first occurrence = lowest cluster id
        cluster_id = ordered[pos].cluster_id
        dist = float(per_cluster[i, pos])
        if dist <= thresholds[cluster_id]:
            entries.append(UnsafeSetEntry(image_id=image_id, assigned_cluster=cluster_id,
                                          distance=dist))
    return entries


@dataclass
class IngestReport:
    applied: int
    unknown_ids: list[str]
    duplicate_ids: list[str]
    unlabeled_ids: list[str]


def ingest_labels(entries: list[UnsafeSetEntry],
                  labels_path: Path | str) -> tuple[list[UnsafeSetEntry], IngestReport]:
    """Attach labels from a `image_id,label` CSV; duplicate rows keep the last
    value, unknown ids are warned about and skipped, and entries that remain
    unlabeled are excluded (reported) since balancing needs ground truth."""
    known = {e.image_id for e in entries}
    labels: dict[str, str] = {}
    unknown: list[str] = []
    duplicates: list[str] = []
    with open(labels_path, newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header != ["image_id", "label"]:
            raise LabelFileError(f"{labels_path}: line 1: expected header 'image_id,label'")
        for lineno, rec in enumerate(reader, start=2):
            if not rec:
                continue
            if len(rec) != 2 or not rec[0] or not rec[1]:
                raise LabelFileError(f"{labels_path}: line {lineno}: malformed row {rec!r}")
            image_id, label = rec
            if image_id not in known:
                unknown.append(image_id)
                continue
            if image_id in labels:
                duplicates.append(image_id)
            labels[image_id] = label

    labeled = [replace(e, label=labels[e.image_id]) for e in entries if e.image_id in labels]
    unlabeled = [e.image_id for e in entries if e.image_id not in labels]
    return labeled, IngestReport(applied=len(labeled), unknown_ids=unknown,
                                 duplicate_ids=duplicates, unlabeled_ids=unlabeled)


def balance(entries: list[UnsafeSetEntry], seed: int) -> BalancedUnsafeSet:
    """Bootstrap every cluster up to the largest cluster's size.

    Originals are always retained; the top-up samples each cluster's own
    members uniformly with replacement from a seeded stream, cluster ids in
    ascending order so the draw sequence is reproducible.
    """
    if not entries:
        raise ValueError("no labeled entries to balance")
    if any(e.label is None for e in entries):
        raise ValueError("balance requires labeled entries only")
    by_cluster: dict[int, list[UnsafeSetEntry]] = {}
    for e in entries:
        by_cluster.setdefault(e.assigned_cluster, []).append(e)
    target = max(len(v) for v in by_cluster.values())

    rng = np.random.default_rng(seed)
    rows: list[tuple[str, str, int]] = []
    for cluster_id in sorted(by_cluster):
        group = by_cluster[cluster_id]
        rows.extend((e.image_id, e.label, cluster_id) for e in group)
        need = target - len(group)
        if need > 0:
            picks = rng.integers(0, len(group), size=need)
            rows.extend((group[p].image_id, group[p].label, cluster_id) for p in picks)
    return BalancedUnsafeSet(rows=rows, target_size=target)
