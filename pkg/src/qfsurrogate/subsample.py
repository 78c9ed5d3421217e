"""Distribution-preserving subsample selection.

Class counts are fixed first by stratified allocation; inside every class the
selected rows are the medoids of a k-medoid (PAM) clustering, so the quantum
step only ever sees points that sit at the centre of a populated region.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from scipy.spatial.distance import cdist

from .dataset import Dataset


class SubsampleError(ValueError):
    pass


def default_subsample_size(n_samples):
    """One fifth of the data, rounded up."""
    return max(1, math.ceil(0.2 * n_samples))


@dataclass(frozen=True)
class SubsampleSpec:
    M: int
    seed: int = 0
    max_medoid_iters: int = 100
    distance: str = "euclidean"

    def __post_init__(self):
        if self.M < 1:
            raise SubsampleError("subsample size M must be at least 1")
        if self.distance != "euclidean":
            raise SubsampleError(f"unsupported distance {self.distance!r}")


@dataclass(frozen=True)
class Subsample:
    indices: np.ndarray
    per_class_counts: dict = field(default_factory=dict)

    @property
    def M(self):
        return int(self.indices.size)


def allocate_strata(ds: Dataset, M: int) -> dict:
    """Split ``M`` across classes proportionally to their frequency.

    Uses the largest-remainder method on the quotas ``M * N_c / N`` with a
    floor of one sample per class and a ceiling of ``N_c``; the result always
    sums to exactly ``M``.
    """
    counts = ds.class_counts()
    classes = sorted(counts)
    N = ds.n_samples
    if M < len(classes):
        raise SubsampleError(
            f"M={M} is smaller than the number of classes ({len(classes)}); "
            f"raise M to at least {len(classes)}"
        )
    if M > N:
        raise SubsampleError(f"M={M} exceeds the dataset size N={N}")

    quota = {c: M * counts[c] / N for c in classes}
    alloc = {c: min(counts[c], max(1, math.floor(quota[c]))) for c in classes}
    deficit = M - sum(alloc.values())
    while deficit > 0:
        open_ = [c for c in classes if alloc[c] < counts[c]]
        # largest remainder first, lower class id on ties
        c = max(open_, key=lambda c: (quota[c] - alloc[c], -c))
        alloc[c] += 1
        deficit -= 1
    while deficit < 0:
        shrinkable = [c for c in classes if alloc[c] > 1]
        c = min(shrinkable, key=lambda c: (quota[c] - alloc[c], c))
        alloc[c] -= 1
        deficit += 1
    return alloc


def medoid_cost(dist, medoids):
    """Total distance from every point to its nearest medoid."""
    return float(dist[:, list(medoids)].min(axis=1).sum())


def _exact_medoids(dist, k):
    """Globally optimal medoids by scoring every k-subset."""
    n = dist.shape[0]
    combos = np.array(list(itertools.combinations(range(n), k)), dtype=int)
    costs = dist[:, combos].min(axis=2).sum(axis=0)
    return [int(i) for i in combos[int(np.argmin(costs))]]


def k_medoids(points, k, seed=0, max_iters=100, exact_limit=200_000):
    """k-medoid clustering.

    Small problems, where ``C(n, k) * n * k`` stays within ``exact_limit``,
    are solved exactly by enumeration. Larger ones use PAM: greedy BUILD followed by
    best-improvement SWAP, which stops at a local optimum.

    Parameters
    ----------
    points : array of shape (n, d)
    k : int
        Number of medoids, ``1 <= k <= n``.
    seed : int
        Orders candidate points for tie-breaking between equal-cost moves.
    max_iters : int
        Cap on SWAP passes.
    exact_limit : int
        Work bound for exact enumeration; 0 forces PAM.

    Returns
    -------
    list of int
        Sorted indices of the ``k`` medoids.
    """
    points = np.asarray(points, dtype=float)
    if points.ndim == 1:
        points = points[:, None]
    n = points.shape[0]
    if n == 0:
        raise SubsampleError("k_medoids needs at least one point")
    if not 1 <= k <= n:
        raise SubsampleError(f"k={k} must lie between 1 and the number of points ({n})")
    if k == n:
        return list(range(n))

    dist = cdist(points, points)
    if math.comb(n, k) * n * k <= exact_limit:
        return sorted(_exact_medoids(dist, k))
    # candidates are visited in a seeded order; strict improvement keeps the first
    order = np.random.default_rng(seed).permutation(n)
    dist_o = dist[np.ix_(order, order)]
    tol = 1e-12 * max(1.0, float(dist.max()))

    medoids = [int(np.argmin(dist_o.sum(axis=0)))]
    nearest = dist_o[:, medoids[0]].copy()
    while len(medoids) < k:
        gain = np.maximum(nearest[:, None] - dist_o, 0.0).sum(axis=0)
        gain[medoids] = -np.inf
        best = int(np.argmax(gain))
        medoids.append(best)
        nearest = np.minimum(nearest, dist_o[:, best])

    cost = medoid_cost(dist_o, medoids)
    for _ in range(max_iters):
        is_medoid = np.zeros(n, dtype=bool)
        is_medoid[medoids] = True
        best_cost, best_move = cost, None
        for i in range(k):
            others = medoids[:i] + medoids[i + 1:]
            if others:
                d_rest = dist_o[:, others].min(axis=1)
            else:
                d_rest = np.full(n, np.inf)
            # cost of replacing medoid i with each candidate h (column h)
            swap_cost = np.minimum(d_rest[:, None], dist_o).sum(axis=0)
            swap_cost[is_medoid] = np.inf
            h = int(np.argmin(swap_cost))
            if swap_cost[h] < best_cost - tol:
                best_cost, best_move = float(swap_cost[h]), (i, h)
        if best_move is None:
            break
        i, h = best_move
        medoids[i] = h
        cost = best_cost
    return sorted(int(order[m]) for m in medoids)


def select_subsample(ds: Dataset, spec: SubsampleSpec) -> Subsample:
    """Stratified k-medoid subsample; indices are row positions in ``ds``."""
    alloc = allocate_strata(ds, spec.M)
    chosen = []
    for c in sorted(alloc):
        rows = np.flatnonzero(ds.labels == c)
        med = k_medoids(ds.samples[rows], alloc[c], seed=spec.seed, max_iters=spec.max_medoid_iters)
        chosen.append(rows[med])
    indices = np.sort(np.concatenate(chosen))
    return Subsample(indices=indices, per_class_counts=dict(alloc))


def write_indices(path, indices):
    """Sidecar file: one integer row index per line."""
    text = "".join(f"{int(i)}\n" for i in indices)
    Path(path).write_text(text, encoding="utf-8")


def read_indices(path):
    lines = Path(path).read_text(encoding="utf-8").split()
    try:
        return np.array([int(s) for s in lines], dtype=int)
    except ValueError as exc:
        raise SubsampleError(f"{path}: malformed index file ({exc})") from None
