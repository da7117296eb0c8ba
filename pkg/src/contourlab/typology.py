"""Discrete contour typologies, tolerance sweeps, k-means, average contours.

Two closed typologies are implemented:

- a nine-class scheme based on comparing the means of the first, middle and
  last spans of a sampled contour (with an endpoint-based variant), and
- a fifteen-class boundary-pitch scheme that codes the ranks of the initial,
  final, highest and lowest pitches of the raw note sequence.

Both take an epsilon tolerance: pitch values closer than epsilon are treated
as equal, so growing epsilon collapses types toward the flat classes. The
sweep helper locates the tolerance that maximizes the entropy of the type
distribution. An open typology is provided by seeded k-means over contour
vectors.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .contour import ContourVector
from .ingest import Phrase, derive_rng

__all__ = [
    "HURON_LABELS",
    "ADAMS_LABELS",
    "AXIS_PATTERNS",
    "TypeDistribution",
    "EpsilonSweep",
    "KMeansResult",
    "AverageContour",
    "huron_type",
    "adams_type",
    "type_distribution",
    "max_entropy_epsilon",
    "kmeans",
    "axis_pattern",
    "average_contour",
]

HURON_LABELS = (
    "ascending",
    "descending",
    "convex",
    "concave",
    "horizontal",
    "horizontal-ascending",
    "ascending-horizontal",
    "horizontal-descending",
    "descending-horizontal",
)

ADAMS_LABELS = (
    "11",
    "12",
    "21",
    "121",
    "132",
    "212",
    "213",
    "231",
    "312",
    "2132",
    "2143",
    "2312",
    "2413",
    "3142",
    "3412",
)

_HURON_MAP = {
    ("<", ">"): "convex",
    (">", "<"): "concave",
    ("<", "<"): "ascending",
    (">", ">"): "descending",
    ("=", "="): "horizontal",
    ("=", "<"): "horizontal-ascending",
    ("<", "="): "ascending-horizontal",
    ("=", ">"): "horizontal-descending",
    (">", "="): "descending-horizontal",
}


def _values_of(item) -> np.ndarray:
    if isinstance(item, ContourVector):
        return np.asarray(item.values, dtype=float)
    if isinstance(item, Phrase):
        return np.asarray(item.pitches, dtype=float)
    return np.asarray(item, dtype=float)


def _relation(a: float, b: float, epsilon: float) -> str:
    if abs(a - b) <= epsilon:
        return "="
    return "<" if a < b else ">"


def huron_type(contour, epsilon: float = 0.0, variant: str = "thirds") -> str:
    """Nine-class type from (first, middle, last) summary pitches.

    ``variant="thirds"`` splits the sampled curve into near-equal thirds
    (first and last get the extra points when the length is not divisible)
    and compares their means. ``variant="endpoints"`` compares the first
    value, the mean of the interior, and the last value.
    """
    v = _values_of(contour)
    if epsilon < 0:
        raise ValueError("epsilon must be >= 0")
    if variant == "thirds":
        if v.size < 3:
            raise ValueError("need at least 3 values for thirds")
        third = math.ceil(v.size / 3)
        if v.size - 2 * third < 1:
            # only v.size == 4: two ceil-thirds of 2 leave no middle
            raise ValueError(f"length {v.size} leaves an empty middle third")
        first = float(np.mean(v[:third]))
        middle = float(np.mean(v[third : v.size - third]))
        last = float(np.mean(v[v.size - third :]))
    elif variant == "endpoints":
        if v.size < 3:
            raise ValueError("need at least 3 values for endpoints")
        first = float(v[0])
        middle = float(np.mean(v[1:-1]))
        last = float(v[-1])
    else:
        raise ValueError(f"unknown variant {variant!r}")
    return _HURON_MAP[(_relation(first, middle, epsilon), _relation(middle, last, epsilon))]


def _merge_classes(values: list[float], epsilon: float) -> dict[float, int]:
    """Single-link merge of values closer than epsilon; rank 1 = lowest group."""
    distinct = sorted(set(values))
    rank = {}
    current = 1
    for i, value in enumerate(distinct):
        if i > 0 and value - distinct[i - 1] > epsilon:
            current += 1
        rank[value] = current
    return rank


def adams_type(phrase, epsilon: float = 0.0) -> str:
    """Fifteen-class boundary code from the raw note pitches.

    The code lists the rank (1 = lowest merged pitch class) of the initial
    pitch, then any interior extreme whose class differs from both boundary
    classes (highest and lowest, in order of first occurrence), then the
    final pitch. A constant phrase is "11".
    """
    p = _values_of(phrase)
    if p.size < 1:
        raise ValueError("empty phrase")
    if epsilon < 0:
        raise ValueError("epsilon must be >= 0")
    initial = float(p[0])
    final = float(p[-1])
    hi_idx = int(np.argmax(p))
    lo_idx = int(np.argmin(p))
    highest = float(p[hi_idx])
    lowest = float(p[lo_idx])

    rank = _merge_classes([initial, final, highest, lowest], epsilon)
    code = [rank[initial]]
    interior = []
    for idx, value in ((hi_idx, highest), (lo_idx, lowest)):
        if 0 < idx < p.size - 1 and rank[value] != rank[initial] and rank[value] != rank[final]:
            interior.append((idx, rank[value]))
    for _, r in sorted(interior):
        code.append(r)
    code.append(rank[final])
    return "".join(str(r) for r in code)


@dataclass
class TypeDistribution:
    typology: str
    epsilon: float
    counts: dict[str, int]
    total: int
    entropy: float

    def frequency(self, label: str) -> float:
        if self.total == 0:
            return 0.0
        return self.counts.get(label, 0) / self.total

    def to_obj(self) -> dict:
        return {
            "typology": self.typology,
            "epsilon": float(self.epsilon),
            "counts": {k: int(v) for k, v in sorted(self.counts.items())},
            "total": int(self.total),
            "entropy": float(self.entropy),
        }


def _entropy(counts: dict[str, int], total: int) -> float:
    if total == 0:
        return 0.0
    h = 0.0
    for c in counts.values():
        if c > 0:
            q = c / total
            h -= q * math.log(q)
    return h


def type_distribution(
    items, typology: str = "huron", epsilon: float = 0.0, variant: str = "thirds"
) -> TypeDistribution:
    """Counts over the full label set (zeros included) plus natural-log entropy."""
    items = list(items)
    if typology == "huron":
        labels = {label: 0 for label in HURON_LABELS}
        for item in items:
            labels[huron_type(item, epsilon=epsilon, variant=variant)] += 1
    elif typology == "adams":
        labels = {label: 0 for label in ADAMS_LABELS}
        for item in items:
            labels[adams_type(item, epsilon=epsilon)] += 1
    else:
        raise ValueError(f"unknown typology {typology!r}")
    total = len(items)
    return TypeDistribution(
        typology=typology,
        epsilon=epsilon,
        counts=labels,
        total=total,
        entropy=_entropy(labels, total),
    )


@dataclass
class EpsilonSweep:
    typology: str
    epsilons: np.ndarray
    entropies: np.ndarray
    best_epsilon: float

    def to_obj(self) -> dict:
        return {
            "typology": self.typology,
            "epsilons": [float(e) for e in self.epsilons],
            "entropies": [float(h) for h in self.entropies],
            "best_epsilon": float(self.best_epsilon),
        }


def max_entropy_epsilon(
    items,
    typology: str = "huron",
    epsilons=None,
    variant: str = "thirds",
) -> EpsilonSweep:
    """Entropy of the type distribution across a tolerance grid.

    The default grid is 0.0 to 4.0 in steps of 0.1; ties for the maximum go
    to the smallest epsilon.
    """
    items = list(items)
    if epsilons is None:
        epsilons = np.round(np.arange(0.0, 4.0 + 1e-9, 0.1), 10)
    epsilons = np.asarray(list(epsilons), dtype=float)
    if epsilons.size == 0:
        raise ValueError("empty epsilon grid")
    entropies = np.array(
        [
            type_distribution(items, typology=typology, epsilon=e, variant=variant).entropy
            for e in epsilons
        ]
    )
    best = float(epsilons[int(np.argmax(entropies))])
    return EpsilonSweep(
        typology=typology, epsilons=epsilons, entropies=entropies, best_epsilon=best
    )


# --- k-means ----------------------------------------------------------------


@dataclass
class KMeansResult:
    k: int
    centroids: np.ndarray
    labels: np.ndarray
    inertia: float
    seed: int

    def assign(self, points) -> np.ndarray:
        points = np.asarray(points, dtype=float)
        d2 = ((points[:, None, :] - self.centroids[None, :, :]) ** 2).sum(axis=2)
        return np.argmin(d2, axis=1)


def _plusplus_init(data, k: int, rng: np.random.Generator) -> np.ndarray:
    n = data.shape[0]
    centroids = np.empty((k, data.shape[1]))
    first = int(rng.integers(n))
    centroids[0] = data[first]
    d2 = ((data - centroids[0]) ** 2).sum(axis=1)
    for c in range(1, k):
        total = d2.sum()
        if total <= 0:
            idx = int(rng.integers(n))
        else:
            r = rng.random() * total
            idx = int(np.searchsorted(np.cumsum(d2), r))
            idx = min(idx, n - 1)
        centroids[c] = data[idx]
        d2 = np.minimum(d2, ((data - centroids[c]) ** 2).sum(axis=1))
    return centroids


def _lloyd(data, centroids, max_iter: int, tol: float):
    k = centroids.shape[0]
    for _ in range(max_iter):
        d2 = ((data[:, None, :] - centroids[None, :, :]) ** 2).sum(axis=2)
        labels = np.argmin(d2, axis=1)
        new_centroids = np.empty_like(centroids)
        taken = np.zeros(data.shape[0], dtype=bool)
        for c in range(k):
            members = labels == c
            if members.any():
                new_centroids[c] = data[members].mean(axis=0)
            else:
                # reseed an empty cluster at the point farthest from its centroid
                dist_own = d2[np.arange(data.shape[0]), labels].copy()
                dist_own[taken] = -1.0
                far = int(np.argmax(dist_own))
                taken[far] = True
                new_centroids[c] = data[far]
        shift = np.sqrt(((new_centroids - centroids) ** 2).sum(axis=1)).max()
        centroids = new_centroids
        if shift < tol:
            break
    d2 = ((data[:, None, :] - centroids[None, :, :]) ** 2).sum(axis=2)
    labels = np.argmin(d2, axis=1)
    inertia = float(d2[np.arange(data.shape[0]), labels].sum())
    return centroids, labels, inertia


def kmeans(
    data,
    k: int,
    seed: int = 0,
    restarts: int = 10,
    max_iter: int = 300,
    tol: float = 1e-8,
) -> KMeansResult:
    """Seeded k-means (greedy D^2 init + Lloyd), best inertia over restarts."""
    data = np.asarray(data, dtype=float)
    if data.ndim != 2:
        raise ValueError("data must be 2-d")
    if not 1 <= k <= data.shape[0]:
        raise ValueError(f"k={k} out of range for {data.shape[0]} points")
    best = None
    for restart in range(restarts):
        rng = derive_rng(seed, "kmeans", restart)
        centroids = _plusplus_init(data, k, rng)
        centroids, labels, inertia = _lloyd(data, centroids, max_iter, tol)
        if best is None or inertia < best[2]:
            best = (centroids, labels, inertia)
    return KMeansResult(
        k=k, centroids=best[0], labels=best[1], inertia=best[2], seed=seed
    )


AXIS_PATTERNS = ("ascending", "descending", "convex", "concave")


def axis_pattern(values, threshold: float = 0.8) -> str | None:
    """Classify a shape by its correlation with the two lowest DCT bases.

    Frequency 1 starts high and falls, so a strong positive correlation means
    descending (negative: ascending); frequency 2 dips in the middle, so
    positive means concave (negative: convex). Returns None when neither
    correlation reaches the threshold in absolute value.
    """
    from .contour import dct_basis

    v = np.asarray(values, dtype=float)
    best = None
    for freq in (1, 2):
        r = float(np.corrcoef(v, dct_basis(v.size, freq))[0, 1])
        if abs(r) >= threshold and (best is None or abs(r) > abs(best[1])):
            best = (freq, r)
    if best is None:
        return None
    freq, r = best
    if freq == 1:
        return "descending" if r > 0 else "ascending"
    return "concave" if r > 0 else "convex"


# --- average contours -------------------------------------------------------


@dataclass
class AverageContour:
    mean: np.ndarray
    se: np.ndarray
    lower: np.ndarray
    upper: np.ndarray
    n: int
    representation: str

    def to_obj(self) -> dict:
        return {
            "mean": [float(x) for x in self.mean],
            "se": [float(x) for x in self.se],
            "lower": [float(x) for x in self.lower],
            "upper": [float(x) for x in self.upper],
            "n": int(self.n),
            "representation": self.representation,
        }


def average_contour(contours) -> AverageContour:
    """Pointwise mean of same-length contours with a 95% band (1.96 s.e.)."""
    contours = list(contours)
    if not contours:
        raise ValueError("no contours to average")
    representation = contours[0].representation
    for c in contours:
        if c.representation != representation:
            raise ValueError("mixed representations in average")
    matrix = np.stack([np.asarray(c.values, dtype=float) for c in contours])
    mean = matrix.mean(axis=0)
    if matrix.shape[0] > 1:
        se = matrix.std(axis=0, ddof=1) / np.sqrt(matrix.shape[0])
    else:
        se = np.zeros_like(mean)
    return AverageContour(
        mean=mean,
        se=se,
        lower=mean - 1.96 * se,
        upper=mean + 1.96 * se,
        n=matrix.shape[0],
        representation=representation,
    )
