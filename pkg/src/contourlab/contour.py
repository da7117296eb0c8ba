"""Fixed-length contour vectors and pitch representations.

A phrase becomes a step curve (each note holds its pitch for its duration)
sampled at N equally spaced midpoints. On top of the raw pitch curve sit four
standardizations (centered, tonicized, finalized, normalized), two relative
representations (intervals and smoothed intervals) and the cosine-transform
representation.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field, replace
from typing import Iterable, Optional

import numpy as np
from scipy.fft import dct

from .ingest import Phrase

REPRESENTATIONS = (
    "pitch",
    "centered",
    "tonicized",
    "finalized",
    "normalized",
    "intervals",
    "smoothed_intervals",
    "cosine",
)

PITCH_LIKE = ("pitch", "centered", "tonicized", "finalized", "normalized")

DEFAULT_N = 50


class MissingMetadataError(ValueError):
    """Raised when a representation needs metadata the phrase lacks."""


@dataclass
class ContourVector:
    values: np.ndarray
    representation: str
    length_notes: int
    duration_qn: float
    source: str = ""
    id: str = ""
    degenerate: bool = False
    tonic: Optional[int] = field(default=None, repr=False)

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=float)
        if self.representation not in REPRESENTATIONS:
            raise ValueError(f"unknown representation {self.representation!r}")


def step_curve_sample(phrase: Phrase, n: int = DEFAULT_N) -> ContourVector:
    """Sample the phrase's step curve at n duration-proportional midpoints.

    Sample times are t_i = (i + 0.5) * T / n over the total duration T, so
    the first and last samples always carry the first and last note's pitch.
    """
    if n < 2:
        raise ValueError("n must be at least 2")
    durations = np.asarray(phrase.durations, dtype=float)
    pitches = np.asarray(phrase.pitches, dtype=float)
    ends = np.cumsum(durations)
    total = ends[-1]
    t = (np.arange(n) + 0.5) * (total / n)
    idx = np.minimum(np.searchsorted(ends, t, side="right"), len(pitches) - 1)
    values = pitches[idx]
    values[0] = pitches[0]
    values[-1] = pitches[-1]
    return ContourVector(
        values=values,
        representation="pitch",
        length_notes=phrase.length,
        duration_qn=phrase.duration,
        source=phrase.source,
        id=phrase.id,
        tonic=phrase.tonic,
    )


def standardize(
    contour: ContourVector,
    kind: str,
    tonic: Optional[int] = None,
    final_pitch: Optional[float] = None,
) -> ContourVector:
    """Transpose or rescale a pitch contour into one of the five standard forms.

    ``pitch`` is the identity; ``centered`` subtracts the mean; ``tonicized``
    and ``finalized`` put the tonic resp. final note at 0; ``normalized`` maps
    the range onto [0, 1], with constant contours pinned at 0.5 and flagged
    degenerate.
    """
    if contour.representation != "pitch":
        raise ValueError("standardize expects a pitch-representation contour")
    if kind not in PITCH_LIKE:
        raise ValueError(f"unknown standardization {kind!r}")
    v = contour.values
    degenerate = False
    if kind == "pitch":
        out = v.copy()
    elif kind == "centered":
        out = v - v.mean()
    elif kind == "tonicized":
        tonic = tonic if tonic is not None else contour.tonic
        if tonic is None:
            raise MissingMetadataError(f"contour {contour.id!r}: no tonic for tonicizing")
        out = v - tonic
    elif kind == "finalized":
        if final_pitch is None:
            final_pitch = v[-1]
        out = v - final_pitch
    else:  # normalized
        lo, hi = v.min(), v.max()
        if hi - lo == 0:
            out = np.full_like(v, 0.5)
            degenerate = True
        else:
            out = (v - lo) / (hi - lo)
    return replace(contour, values=out, representation=kind, degenerate=degenerate)


def intervals(contour: ContourVector, smooth: bool = False, sigma: float = 2.0) -> ContourVector:
    """Consecutive sample differences, optionally Gaussian-smoothed.

    The kernel has width ``sigma`` samples, is truncated at 4 sigma and
    renormalized at the boundaries so the smoothing never leaks mass.
    """
    if contour.representation != "pitch":
        raise ValueError("intervals expects a pitch-representation contour")
    d = np.diff(contour.values)
    if smooth:
        radius = int(np.ceil(4 * sigma))
        x = np.arange(-radius, radius + 1)
        kernel = np.exp(-0.5 * (x / sigma) ** 2)
        num = np.convolve(d, kernel, mode="same")
        den = np.convolve(np.ones_like(d), kernel, mode="same")
        d = num / den
    return replace(
        contour,
        values=d,
        representation="smoothed_intervals" if smooth else "intervals",
    )


def cosine_contour(contour: ContourVector, n_coef: Optional[int] = None) -> ContourVector:
    """Orthonormal DCT-II coefficients of a centered contour, frequencies 1..n_coef.

    The DC coefficient is identically 0 for centered input and is dropped.
    With n_coef = N - 1 the transform is an isometry: Euclidean distances
    between coefficient vectors equal distances between centered contours.
    """
    if contour.representation != "centered":
        raise ValueError("cosine_contour expects a centered contour")
    n = len(contour.values)
    if n_coef is None:
        n_coef = n - 1
    if not (1 <= n_coef <= n - 1):
        raise ValueError(f"n_coef must be in [1, {n - 1}]")
    coef = dct(contour.values, type=2, norm="ortho")
    return replace(contour, values=coef[1 : n_coef + 1], representation="cosine")


def phrase_to_contour(
    phrase: Phrase,
    representation: str = "centered",
    n: int = DEFAULT_N,
    n_coef: Optional[int] = None,
) -> ContourVector:
    """Full phrase-to-vector pipeline for any of the eight representations."""
    base = step_curve_sample(phrase, n)
    if representation == "pitch":
        return base
    if representation in PITCH_LIKE:
        return standardize(base, representation)
    if representation == "intervals":
        return intervals(base, smooth=False)
    if representation == "smoothed_intervals":
        return intervals(base, smooth=True)
    if representation == "cosine":
        return cosine_contour(standardize(base, "centered"), n_coef=n_coef)
    raise ValueError(f"unknown representation {representation!r}")


def contour_matrix(contours: Iterable[ContourVector]) -> np.ndarray:
    """Stack contour values row-wise, checking that lengths agree."""
    contours = list(contours)
    if not contours:
        raise ValueError("no contours")
    lengths = {len(c.values) for c in contours}
    if len(lengths) != 1:
        raise ValueError(f"mixed contour lengths: {sorted(lengths)}")
    return np.stack([c.values for c in contours])


def dct_basis(n: int, frequency: int) -> np.ndarray:
    """The orthonormal DCT-II basis vector of the given frequency, length n."""
    k = np.arange(n)
    vec = np.cos(np.pi * frequency * (2 * k + 1) / (2 * n))
    return vec * np.sqrt(2.0 / n)


# --- JSONL persistence ------------------------------------------------------


def write_contours(path, contours: Iterable[ContourVector]) -> None:
    with open(path, "w", encoding="utf8") as fh:
        for c in contours:
            obj = {
                "id": c.id,
                "source": c.source,
                "representation": c.representation,
                "values": [float(v) for v in c.values],
                "length_notes": c.length_notes,
                "duration_qn": c.duration_qn,
                "degenerate": c.degenerate,
            }
            if c.tonic is not None:
                obj["tonic"] = c.tonic
            fh.write(json.dumps(obj) + "\n")


def read_contours(path) -> list[ContourVector]:
    out = []
    with open(path, encoding="utf8") as fh:
        for line in fh:
            line = line.strip()
            if not line:
                continue
            obj = json.loads(line)
            out.append(
                ContourVector(
                    values=np.array(obj["values"], dtype=float),
                    representation=obj["representation"],
                    length_notes=int(obj["length_notes"]),
                    duration_qn=float(obj["duration_qn"]),
                    source=obj.get("source", ""),
                    id=obj.get("id", ""),
                    degenerate=bool(obj.get("degenerate", False)),
                    tonic=obj.get("tonic"),
                )
            )
    return out
