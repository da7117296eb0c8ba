"""Distances between contour vectors and pairwise distance sampling.

Three metrics are supported:

- ``euclidean``: plain L2 between equal-length vectors.
- ``dtw``: dynamic time warping with unit steps and |a - b| local cost,
  normalized by alignment path length. Among cost-optimal alignments the
  shortest path is used, which makes the normalized value well defined; the
  DP therefore minimizes (cost, path length) lexicographically.
- ``umap``: L2 between the rows of a low-dimensional embedding aligned with
  the contours; the caller supplies the embedding.

``pairwise_sample`` draws m index pairs (i != j, uniform with replacement)
from a seeded stream and evaluates the chosen metric. DTW over the cosine
representation is rejected: warping coefficient axes has no meaning.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from numba import njit, prange

from .contour import contour_matrix

__all__ = ["DistanceSample", "euclidean", "dtw", "dtw_path_length", "pairwise_sample"]

METRICS = ("euclidean", "dtw", "umap")


@dataclass
class DistanceSample:
    values: np.ndarray
    metric: str
    representation: str
    dataset: str
    pair_seed: int
    pairs: np.ndarray = field(repr=False, default=None)

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=float)
        if self.values.ndim != 1:
            raise ValueError("values must be 1-d")
        if np.any(self.values < 0):
            raise ValueError("distances must be non-negative")


def euclidean(a, b) -> float:
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    if a.shape != b.shape:
        raise ValueError(f"length mismatch: {a.shape} vs {b.shape}")
    return float(np.sqrt(np.sum((a - b) ** 2)))


@njit(cache=True)
def _dtw_pair(a, b):
    """Returns (total cost, path length) of the lexicographically best warp.

    cost[i, j] is the cheapest alignment of a[:i+1] with b[:j+1]; steps[i, j]
    counts its cells. Ties in cost are broken toward fewer cells, which is
    exact because path length is itself additive along the recursion.
    """
    n = a.shape[0]
    m = b.shape[0]
    big = np.inf
    cost = np.empty((n, m))
    steps = np.empty((n, m), np.int64)
    for i in range(n):
        for j in range(m):
            local = a[i] - b[j]
            if local < 0.0:
                local = -local
            if i == 0 and j == 0:
                cost[i, j] = local
                steps[i, j] = 1
                continue
            best_c = big
            best_s = 0
            if i > 0 and j > 0:
                best_c = cost[i - 1, j - 1]
                best_s = steps[i - 1, j - 1]
            if i > 0:
                c = cost[i - 1, j]
                if c < best_c or (c == best_c and steps[i - 1, j] < best_s):
                    best_c = c
                    best_s = steps[i - 1, j]
            if j > 0:
                c = cost[i, j - 1]
                if c < best_c or (c == best_c and steps[i, j - 1] < best_s):
                    best_c = c
                    best_s = steps[i, j - 1]
            cost[i, j] = best_c + local
            steps[i, j] = best_s + 1
    return cost[n - 1, m - 1], steps[n - 1, m - 1]


@njit(cache=True, parallel=True)
def _dtw_batch(rows, ii, jj):
    out = np.empty(ii.shape[0])
    for k in prange(ii.shape[0]):
        c, s = _dtw_pair(rows[ii[k]], rows[jj[k]])
        out[k] = c / s
    return out


def dtw(a, b) -> float:
    """Path-length-normalized DTW distance between two sequences."""
    a = np.ascontiguousarray(a, dtype=float)
    b = np.ascontiguousarray(b, dtype=float)
    if a.ndim != 1 or b.ndim != 1 or a.size == 0 or b.size == 0:
        raise ValueError("dtw needs two non-empty 1-d sequences")
    c, s = _dtw_pair(a, b)
    return float(c / s)


def dtw_path_length(a, b) -> int:
    """Number of cells on the alignment path that ``dtw`` normalizes by."""
    a = np.ascontiguousarray(a, dtype=float)
    b = np.ascontiguousarray(b, dtype=float)
    _, s = _dtw_pair(a, b)
    return int(s)


def _draw_pairs(n: int, m: int, rng: np.random.Generator) -> tuple[np.ndarray, np.ndarray]:
    ii = rng.integers(0, n, size=m)
    jj = rng.integers(0, n - 1, size=m)
    jj = jj + (jj >= ii)
    return ii, jj


def pairwise_sample(
    contours,
    metric: str,
    m: int = 30000,
    rng: np.random.Generator | int = 0,
    embedding=None,
    dataset: str | None = None,
) -> DistanceSample:
    """Sample m pairwise distances between distinct contours.

    For the ``umap`` metric, ``embedding`` must be either an (n, d) array
    aligned row-for-row with ``contours`` or a fitted model exposing
    ``embedding_``.
    """
    contours = list(contours)
    if len(contours) < 2:
        raise ValueError("need at least 2 contours to sample pairs")
    if metric not in METRICS:
        raise ValueError(f"unknown metric {metric!r}")
    representation = contours[0].representation
    if metric == "dtw" and representation == "cosine":
        raise ValueError("dtw over cosine coefficients is not meaningful; use euclidean")

    if isinstance(rng, np.random.Generator):
        pair_seed = int(rng.integers(0, 2**63 - 1))
    else:
        pair_seed = int(rng)
    gen = np.random.Generator(np.random.PCG64(np.random.SeedSequence([pair_seed, 0])))

    matrix = contour_matrix(contours)
    ii, jj = _draw_pairs(matrix.shape[0], m, gen)

    if metric == "euclidean":
        values = np.sqrt(np.sum((matrix[ii] - matrix[jj]) ** 2, axis=1))
    elif metric == "dtw":
        values = _dtw_batch(np.ascontiguousarray(matrix), ii, jj)
    else:
        if embedding is None:
            raise ValueError("umap metric requires an embedding")
        coords = getattr(embedding, "embedding_", embedding)
        coords = np.asarray(coords, dtype=float)
        if coords.shape[0] != matrix.shape[0]:
            raise ValueError(
                f"embedding has {coords.shape[0]} rows for {matrix.shape[0]} contours"
            )
        values = np.sqrt(np.sum((coords[ii] - coords[jj]) ** 2, axis=1))

    if dataset is None:
        dataset = contours[0].source or ""
    return DistanceSample(
        values=values,
        metric=metric,
        representation=representation,
        dataset=dataset,
        pair_seed=pair_seed,
        pairs=np.stack([ii, jj], axis=1),
    )
