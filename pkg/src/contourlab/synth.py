"""Synthetic phrase generation with matched first-order statistics.

``MarkovContourModel`` learns the bigram pitch transitions, the initial-pitch
distribution (binomial, fitted by moments) and the mean phrase length
(Poisson) of a phrase corpus, then samples new phrases whose local statistics
match the corpus but whose global shapes carry no cluster structure beyond
what the chain induces. ``make_clustered`` carves an artificially clustered
dataset out of a large sampled pool by keeping only the phrases nearest to
k-means centroids in cosine-coefficient space.
"""

from __future__ import annotations

import numpy as np
from sklearn.base import BaseEstimator

from .contour import DEFAULT_N, phrase_to_contour
from .ingest import Note, Phrase, as_generator, derive_seed, effective_seed

__all__ = ["MarkovContourModel", "sample_uniform", "make_clustered"]


class MarkovContourModel(BaseEstimator):
    """First-order pitch chain with binomial initial pitch and Poisson length.

    Fitted attributes: ``states_`` (sorted pitch vocabulary), ``transition_``
    (row-stochastic matrix, absorbing pitches get a self-loop), ``initial_n_``
    and ``initial_p_`` (binomial parameters for the first pitch) and
    ``length_rate_`` (mean note count).
    """

    def __init__(self, min_length: int = 4):
        self.min_length = min_length

    def fit(self, phrases, y=None):
        phrases = list(phrases)
        if not phrases:
            raise ValueError("no phrases to fit")
        states = sorted({p for ph in phrases for p in ph.pitches})
        index = {s: i for i, s in enumerate(states)}
        counts = np.zeros((len(states), len(states)))
        for ph in phrases:
            pitches = ph.pitches
            for a, b in zip(pitches, pitches[1:]):
                counts[index[a], index[b]] += 1
        row_sums = counts.sum(axis=1)
        transition = np.zeros_like(counts)
        for i in range(len(states)):
            if row_sums[i] > 0:
                transition[i] = counts[i] / row_sums[i]
            else:
                transition[i, i] = 1.0

        firsts = np.array([ph.pitches[0] for ph in phrases], dtype=float)
        mean = float(firsts.mean())
        var = float(firsts.var())
        if mean <= 0:
            raise ValueError("initial pitches must be positive to fit a binomial")
        p = float(np.clip(1.0 - var / mean, 1e-6, 1.0 - 1e-6))
        n = max(int(round(mean / p)), int(firsts.max()))

        self.states_ = np.array(states, dtype=np.int64)
        self.transition_ = transition
        self.initial_n_ = n
        self.initial_p_ = p
        self.length_rate_ = float(np.mean([ph.length for ph in phrases]))
        return self

    def sample(
        self,
        count: int,
        rng: np.random.Generator | int = 0,
        source: str = "synthetic-uniform",
    ) -> list[Phrase]:
        """Draw phrases; lengths below ``min_length`` are redrawn, durations are 1."""
        if not hasattr(self, "states_"):
            raise ValueError("model is not fitted")
        if count <= 0:
            raise ValueError("count must be positive")
        rng = as_generator(rng)

        lengths = rng.poisson(self.length_rate_, size=count)
        short = lengths < self.min_length
        while short.any():
            lengths[short] = rng.poisson(self.length_rate_, size=int(short.sum()))
            short = lengths < self.min_length

        initial = rng.binomial(self.initial_n_, self.initial_p_, size=count)
        current = _nearest_state(self.states_, initial)

        cum = np.cumsum(self.transition_, axis=1)
        cum[:, -1] = 1.0
        max_len = int(lengths.max())
        walk = np.empty((count, max_len), dtype=np.int64)
        walk[:, 0] = current
        for step in range(1, max_len):
            draws = rng.random(count)
            nxt = (cum[current] < draws[:, None]).sum(axis=1)
            np.minimum(nxt, len(self.states_) - 1, out=nxt)
            active = step < lengths
            current = np.where(active, nxt, current)
            walk[:, step] = current

        phrases = []
        for i in range(count):
            pitches = self.states_[walk[i, : lengths[i]]]
            notes = [Note(int(p), 1.0) for p in pitches]
            phrases.append(Phrase(id=f"{source}-{i}", notes=notes, tonic=None, source=source))
        return phrases


def _nearest_state(states: np.ndarray, values: np.ndarray) -> np.ndarray:
    """Index of the nearest state per value; ties resolve to the lower state."""
    pos = np.searchsorted(states, values)
    pos = np.clip(pos, 0, len(states) - 1)
    prev = np.clip(pos - 1, 0, len(states) - 1)
    use_prev = (np.abs(states[prev] - values) <= np.abs(states[pos] - values)) & (prev != pos)
    return np.where(use_prev, prev, pos)


def sample_uniform(
    model: MarkovContourModel,
    count: int,
    rng: np.random.Generator | int = 0,
    source: str = "synthetic-uniform",
) -> list[Phrase]:
    """Sample an unclustered synthetic corpus from a fitted chain."""
    return model.sample(count, rng=rng, source=source)


def make_clustered(
    uniform,
    k: int = 5,
    pool: int = 25000,
    keep: int = 1000,
    rng: np.random.Generator | int = 0,
) -> tuple[list[Phrase], np.ndarray]:
    """Select an artificially clustered subset of a synthetic pool.

    The first ``pool`` phrases are embedded as cosine coefficient vectors and
    grouped by k-means; the ``keep`` phrases nearest their centroids (split as
    evenly as possible across clusters) form the clustered dataset. If some
    cluster is too small to fill its quota the clustering is retried with a
    fresh derived seed, up to 5 retries. Returns (phrases, cluster labels).
    """
    from .typology import kmeans

    uniform = list(uniform)
    if len(uniform) < pool:
        raise ValueError(f"need at least pool={pool} phrases, got {len(uniform)}")
    if k < 1 or keep < k:
        raise ValueError("need keep >= k >= 1")
    seed = effective_seed(rng)
    pool_phrases = uniform[:pool]
    matrix = np.stack(
        [phrase_to_contour(ph, "cosine", n=DEFAULT_N).values for ph in pool_phrases]
    )

    if keep >= pool:
        result = kmeans(matrix, k, seed=derive_seed(seed, "select", 0))
        return pool_phrases, result.labels

    quotas = [keep // k + (1 if c < keep % k else 0) for c in range(k)]
    last_sizes = None
    for attempt in range(6):
        result = kmeans(matrix, k, seed=derive_seed(seed, "select", attempt))
        sizes = np.bincount(result.labels, minlength=k)
        if all(sizes[c] >= quotas[c] for c in range(k)):
            chosen: list[Phrase] = []
            labels: list[int] = []
            for c in range(k):
                members = np.flatnonzero(result.labels == c)
                dist = np.sqrt(((matrix[members] - result.centroids[c]) ** 2).sum(axis=1))
                order = np.lexsort((members, dist))
                for m in members[order[: quotas[c]]]:
                    chosen.append(pool_phrases[m])
                    labels.append(c)
            return chosen, np.array(labels, dtype=np.int64)
        last_sizes = sizes
    raise ValueError(
        f"could not fill cluster quotas after 6 attempts; last sizes {list(last_sizes)}"
    )
