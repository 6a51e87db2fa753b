"""Offline knee detection on a decreasing quality curve.

Both axes are min-max normalized, y is inverted (the curve decreases), and
the knee is the largest value of the difference curve d = y_inv - x_norm
among local maxima that pass the sensitivity threshold test: a local maximum
qualifies if d later drops below (d_max - S * mean x-spacing) before the
next local maximum. When no candidate qualifies the best difference point is
returned with the weak flag set.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np


@dataclass(frozen=True)
class KneeResult:
    x: float
    index: int
    weak: bool


def kneedle(xs, ys, sensitivity: float = 1.0) -> KneeResult:
    xs = np.asarray(xs, dtype=np.float64)
    ys = np.asarray(ys, dtype=np.float64)
    if xs.size < 3:
        raise ValueError("kneedle needs at least 3 points")
    if xs.shape != ys.shape:
        raise ValueError("xs and ys must have equal length")
    if np.any(np.diff(xs) <= 0):
        raise ValueError("xs must be strictly increasing")

    x_norm = (xs - xs[0]) / (xs[-1] - xs[0])
    y_range = ys.max() - ys.min()
    y_norm = np.zeros_like(ys) if y_range == 0 else (ys - ys.min()) / y_range
    diff = (1.0 - y_norm) - x_norm

    maxima = [i for i in range(1, xs.size - 1)
              if diff[i] > diff[i - 1] and diff[i] >= diff[i + 1]]
    spacing = float(np.mean(np.diff(x_norm)))

    qualified: list[int] = []
    for pos, i in enumerate(maxima):
        threshold = diff[i] - sensitivity * spacing
        stop = maxima[pos + 1] if pos + 1 < len(maxima) else xs.size
        if np.any(diff[i + 1 : stop] < threshold):
            qualified.append(i)

    if qualified:
        best = max(qualified, key=lambda i: (diff[i], -i))
        return KneeResult(x=float(xs[best]), index=best, weak=False)
    # No qualifying knee: fall back to the best difference point. Ties within
    # rounding noise go to the earliest x (flat or linear curves hit this).
    best = int(np.flatnonzero(diff >= diff.max() - 1e-12)[0])
    return KneeResult(x=float(xs[best]), index=best, weak=True)
