"""Average-linkage agglomerative clustering with a fixed tie-break rule.

The pair with the minimum average cross-cluster distance merges first; ties
break to the pair whose smaller minimum-member index is lowest, then to the
smaller of the other minimum-member indexes. Cross-cluster sums are always
recomputed from the original matrix over sorted member lists, so linkage
values are independent of merge history.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from rccdbg.cluster.distance import DistanceMatrix


@dataclass(frozen=True)
class Merge:
    a: int            # cluster ids; originals are 0..n-1, merge t creates n+t
    b: int
    distance: float
    size: int


@dataclass
class Dendrogram:
    n: int
    merges: list[Merge]

    def members(self) -> dict[int, list[int]]:
        """Member lists for every cluster id that ever existed."""
        out = {i: [i] for i in range(self.n)}
        for t, m in enumerate(self.merges):
            out[self.n + t] = sorted(out[m.a] + out[m.b])
        return out


def _cross_sum(d: np.ndarray, a: list[int], b: list[int]) -> float:
    # canonical orientation: lower min-member cluster on rows, so the
    # summation order is a pure function of the two member sets
    if a[0] > b[0]:
        a, b = b, a
    return float(d[np.ix_(a, b)].sum())


def hac_average_linkage(dm: DistanceMatrix) -> Dendrogram:
    dm.validate()
    n = dm.n
    if n < 2:
        raise ValueError("need at least 2 items to cluster")
    d = dm.d

    ids = list(range(n))                  # active cluster ids
    members = {i: [i] for i in range(n)}
    sizes = np.ones(n, dtype=np.int64)
    minmem = np.arange(n, dtype=np.int64)
    sums = d.copy()                       # cross-pair distance sums, active x active

    merges: list[Merge] = []
    for step in range(n - 1):
        m = len(ids)
        avg = sums / np.outer(sizes, sizes)
        avg[np.diag_indices(m)] = np.inf
        best = avg.min()
        cand = np.argwhere(avg == best)
        cand = cand[cand[:, 0] < cand[:, 1]]
        keys = np.stack([np.minimum(minmem[cand[:, 0]], minmem[cand[:, 1]]),
                         np.maximum(minmem[cand[:, 0]], minmem[cand[:, 1]])], axis=1)
        pick = int(np.lexsort((keys[:, 1], keys[:, 0]))[0])
        i, j = int(cand[pick, 0]), int(cand[pick, 1])
        if minmem[j] < minmem[i]:
            i, j = j, i

        new_id = n + step
        new_members = sorted(members[ids[i]] + members[ids[j]])
        merges.append(Merge(a=ids[i], b=ids[j], distance=best,
                            size=len(new_members)))
        members[new_id] = new_members

        keep = [k for k in range(m) if k not in (i, j)]
        new_sums = np.empty((m - 1, m - 1), dtype=np.float64)
        new_sums[:-1, :-1] = sums[np.ix_(keep, keep)]
        row = np.array([_cross_sum(d, new_members, members[ids[k]]) for k in keep])
        new_sums[-1, :-1] = row
        new_sums[:-1, -1] = row
        new_sums[-1, -1] = 0.0

        sums = new_sums
        sizes = np.append(sizes[keep], len(new_members))
        minmem = np.append(minmem[keep], new_members[0])
        ids = [ids[k] for k in keep] + [new_id]

    return Dendrogram(n=n, merges=merges)


def cut(dendrogram: Dendrogram, k: int) -> np.ndarray:
    """Labels after undoing the last k-1 merges; dense 0..k-1 ordered by
    each group's smallest member index."""
    n = dendrogram.n
    if not 1 <= k <= n:
        raise ValueError(f"K={k} out of range [1, {n}]")
    groups = {i: [i] for i in range(n)}
    for t in range(n - k):
        m = dendrogram.merges[t]
        groups[n + t] = groups.pop(m.a) + groups.pop(m.b)
    ordered = sorted((sorted(g) for g in groups.values()), key=lambda g: g[0])
    labels = np.empty(n, dtype=np.int64)
    for label, group in enumerate(ordered):
        labels[group] = label
    return labels
