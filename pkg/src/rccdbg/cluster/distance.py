"""Pairwise Euclidean distances between flattened heatmap vectors."""

from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np


@dataclass
class DistanceMatrix:
    ids: list[str]
    d: np.ndarray  # (n, n) float64, symmetric, zero diagonal

    @property
    def n(self) -> int:
        return len(self.ids)

    def validate(self) -> None:
        n = self.n
        if self.d.shape != (n, n):
            raise ValueError(f"matrix shape {self.d.shape} does not match {n} ids")
        if not np.all(np.isfinite(self.d)):
            raise ValueError("distance matrix has non-finite entries")
        if np.any(self.d < 0):
            raise ValueError("distance matrix has negative entries")
        if np.any(np.diag(self.d) != 0.0):
            raise ValueError("distance matrix diagonal must be exactly zero")
        if not np.array_equal(self.d, self.d.T):
            raise ValueError("distance matrix must be exactly symmetric")


def _fill_row(d: np.ndarray, vectors: np.ndarray, i: int) -> None:
    diff = vectors[i + 1 :] - vectors[i]
    d[i, i + 1 :] = np.sqrt((diff * diff).sum(axis=1))


def distance_matrix(ids: list[str], vectors, workers: int = 1) -> DistanceMatrix:
    """Upper triangle computed row by row (optionally across threads), then
    mirrored, so results are bit-identical regardless of parallelism."""
    if len(ids) < 2:
        raise ValueError("need at least 2 heatmaps")
    if len(ids) != len(vectors):
        raise ValueError(f"{len(ids)} ids but {len(vectors)} vectors")
    lengths = {v.shape[-1] if hasattr(v, "shape") else len(v) for v in vectors}
    if len(lengths) > 1:
        sizes = {ids[k]: len(np.ravel(vectors[k])) for k in range(len(ids))}
        a, b = sorted(sizes, key=sizes.get)[0], sorted(sizes, key=sizes.get)[-1]
        raise ValueError(
            f"heatmap length mismatch: {a!r} has {sizes[a]} values, {b!r} has {sizes[b]}")
    x = np.asarray(np.stack([np.ravel(v) for v in vectors]), dtype=np.float64)
    n = len(ids)
    d = np.zeros((n, n), dtype=np.float64)
    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            list(pool.map(lambda i: _fill_row(d, x, i), range(n - 1)))
    else:
        for i in range(n - 1):
            _fill_row(d, x, i)
    d = d + d.T
    return DistanceMatrix(ids=list(ids), d=d)
