"""Symbolic-melody ingestion: kern parsing, phrase extraction, random segments.

The native persistence format is JSONL: one melody (or phrase) object per
line, with durations serialized as decimal strings so that values round-trip
exactly through ``repr(float)``.
"""

from __future__ import annotations

import json
import re
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, NamedTuple, Optional

import numpy as np

__all__ = [
    "Note",
    "Melody",
    "Phrase",
    "ParseError",
    "UnsupportedInputError",
    "parse_kern",
    "extract_phrases",
    "random_segments",
    "segment_corpus",
    "aggregate_sample",
    "read_melodies",
    "write_melodies",
    "read_phrases",
    "write_phrases",
    "read_phrases_or_melodies",
    "load_kern_dir",
    "derive_rng",
    "derive_seed",
    "effective_seed",
    "as_generator",
]


class ParseError(ValueError):
    """Raised for malformed kern input; message carries the line number."""


class UnsupportedInputError(ParseError):
    """Raised for kern features outside the monophonic subset (e.g. spines)."""


class Note(NamedTuple):
    pitch: int
    duration: float


@dataclass
class Melody:
    """A monophonic melody with phrase boundary marks.

    Pitches are MIDI semitones (0-127), durations are quarter-note values,
    and ``phrase_ends`` lists the note indices (inclusive) at which a phrase
    ends.
    """

    id: str
    notes: list[Note]
    phrase_ends: list[int] = field(default_factory=list)
    tonic: Optional[int] = None
    source: str = ""

    def __post_init__(self):
        if not self.notes:
            raise ValueError(f"melody {self.id!r}: empty note list")
        for i, note in enumerate(self.notes):
            if not (0 <= note.pitch <= 127):
                raise ValueError(f"melody {self.id!r}: pitch {note.pitch} out of MIDI range")
            if not note.duration > 0:
                raise ValueError(f"melody {self.id!r}: non-positive duration at note {i}")
        ends = self.phrase_ends
        if any(b <= a for a, b in zip(ends, ends[1:])):
            raise ValueError(f"melody {self.id!r}: phrase_ends not strictly increasing")
        if ends and ends[-1] >= len(self.notes):
            raise ValueError(f"melody {self.id!r}: phrase end beyond last note")
        if self.tonic is not None and not (0 <= self.tonic <= 127):
            raise ValueError(f"melody {self.id!r}: tonic {self.tonic} out of MIDI range")

    @property
    def pitches(self) -> list[int]:
        return [n.pitch for n in self.notes]

    @property
    def durations(self) -> list[float]:
        return [n.duration for n in self.notes]


@dataclass
class Phrase:
    """A phrase-sized run of notes, the unit of all contour analyses."""

    id: str
    notes: list[Note]
    tonic: Optional[int] = None
    source: str = ""

    def __post_init__(self):
        if not self.notes:
            raise ValueError(f"phrase {self.id!r}: empty note list")

    @property
    def length(self) -> int:
        return len(self.notes)

    @property
    def duration(self) -> float:
        return float(sum(n.duration for n in self.notes))

    @property
    def final_pitch(self) -> int:
        return self.notes[-1].pitch

    @property
    def pitches(self) -> list[int]:
        return [n.pitch for n in self.notes]

    @property
    def durations(self) -> list[float]:
        return [n.duration for n in self.notes]


# --- kern parsing -----------------------------------------------------------

_PITCH_CLASS = {"c": 0, "d": 2, "e": 4, "f": 5, "g": 7, "a": 9, "b": 11}

# structural characters that may decorate a note token without affecting
# pitch or duration: phrase/slur braces, tie marks, fermata
_DECORATIONS = "{}()[]_;"
_TOKEN_RE = re.compile(r"^(\d+)(\.*)([a-gA-G]+|r)([#\-n]*)$")
_TONIC_RE = re.compile(r"^\*([a-gA-G])([#\-]*):$")


def _kern_pitch(letters: str, accidentals: str, lineno: int) -> int:
    base = letters[0]
    if letters != base * len(letters):
        raise ParseError(f"line {lineno}: mixed pitch letters in {letters!r}")
    pc = _PITCH_CLASS[base.lower()]
    if base.islower():
        pitch = 60 + pc + 12 * (len(letters) - 1)
    else:
        pitch = 48 + pc - 12 * (len(letters) - 1)
    for acc in accidentals:
        if acc == "#":
            pitch += 1
        elif acc == "-":
            pitch -= 1
    if not (0 <= pitch <= 127):
        raise ParseError(f"line {lineno}: pitch {letters}{accidentals} outside MIDI range")
    return pitch


def _kern_duration(digits: str, dots: str, lineno: int) -> float:
    recip = int(digits)
    if recip == 0:
        raise ParseError(f"line {lineno}: zero duration {digits!r}")
    dur = 4.0 / recip
    return dur * (2.0 - 0.5 ** len(dots))


def parse_kern(text: str, id: str = "melody", source: str = "kern") -> Melody:
    """Parse a single-spine kern document into a :class:`Melody`.

    Supports pitch letters with the octave-doubling convention (``c`` is
    middle C, MIDI 60; ``cc`` an octave above; ``C`` an octave below),
    duration digits with dots, rests, barlines, ``{``/``}`` phrase markers,
    comments, key metadata, and the ``*-`` terminator. Rests are skipped but
    do not break phrases; unknown ``*`` interpretations are ignored. Ties
    merge durations when the tied tokens share a pitch.
    """
    notes: list[Note] = []
    phrase_ends: set[int] = set()
    tonic: Optional[int] = None
    tie_open = False

    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.rstrip("\r")
        if "\t" in line:
            raise UnsupportedInputError(f"line {lineno}: multiple spines are not supported")
        line = line.strip()
        if not line or line.startswith("!"):
            continue
        if line.startswith("="):
            continue
        if line.startswith("*"):
            if line == "*-":
                break
            m = _TONIC_RE.match(line)
            if m:
                pc = _PITCH_CLASS[m.group(1).lower()]
                pc += m.group(2).count("#") - m.group(2).count("-")
                tonic = 60 + pc % 12
            continue

        closes_phrase = "}" in line
        opens_tie = "[" in line
        core = "".join(ch for ch in line if ch not in _DECORATIONS)

        m = _TOKEN_RE.match(core)
        if m is None:
            raise ParseError(f"line {lineno}: malformed token {line!r}")
        digits, dots, letters, accidentals = m.groups()
        duration = _kern_duration(digits, dots, lineno)

        if letters == "r":
            if closes_phrase and notes:
                phrase_ends.add(len(notes) - 1)
            tie_open = False
            continue

        pitch = _kern_pitch(letters, accidentals, lineno)
        if tie_open and notes and notes[-1].pitch == pitch:
            notes[-1] = Note(pitch, notes[-1].duration + duration)
            tie_open = opens_tie or "_" in line
        else:
            notes.append(Note(pitch, duration))
            tie_open = opens_tie
        if closes_phrase:
            phrase_ends.add(len(notes) - 1)

    if not notes:
        raise ParseError("document contains no notes")
    return Melody(id=id, notes=notes, phrase_ends=sorted(phrase_ends), tonic=tonic, source=source)


# --- phrase extraction ------------------------------------------------------


def extract_phrases(melody: Melody) -> list[Phrase]:
    """Split a melody into phrases at its phrase-end marks.

    Without marks the whole melody is one phrase. Notes are conserved: the
    concatenated phrase note lists equal the melody's note list.
    """
    ends = list(melody.phrase_ends)
    if not ends or ends[-1] != len(melody.notes) - 1:
        ends.append(len(melody.notes) - 1)
    phrases = []
    start = 0
    for k, end in enumerate(ends):
        phrases.append(
            Phrase(
                id=f"{melody.id}-p{k}",
                notes=melody.notes[start : end + 1],
                tonic=melody.tonic,
                source=melody.source,
            )
        )
        start = end + 1
    return phrases


def random_segments(melody: Melody, lam: float, rng: np.random.Generator | int) -> list[Phrase]:
    """Cut a melody into random chunks with Poisson-distributed lengths.

    Chunk lengths are drawn from Poisson(``lam``), redrawing any draw below 2;
    the last chunk takes whatever remains. The first and final chunks are
    discarded so the survivors are unlikely to align with phrase boundaries.
    """
    if lam <= 0:
        raise ValueError("lam must be positive")
    rng = as_generator(rng)
    n = len(melody.notes)
    bounds = [0]
    while bounds[-1] < n:
        length = 0
        while length < 2:
            length = int(rng.poisson(lam))
        bounds.append(min(bounds[-1] + length, n))
    chunks = [(bounds[i], bounds[i + 1]) for i in range(len(bounds) - 1)]
    segments = []
    for k, (lo, hi) in enumerate(chunks[1:-1], start=1):
        segments.append(
            Phrase(
                id=f"{melody.id}-seg{k}",
                notes=melody.notes[lo:hi],
                tonic=melody.tonic,
                source=f"{melody.source}-segments",
            )
        )
    return segments


def segment_corpus(melodies: Iterable[Melody], lam: float, seed: int) -> list[Phrase]:
    """Random segments for a whole corpus, one derived RNG stream per melody."""
    segments = []
    for melody in melodies:
        segments.extend(random_segments(melody, lam, derive_rng(seed, melody.id)))
    return segments


def aggregate_sample(
    datasets: list[list[Phrase]],
    per_dataset: int,
    rng: np.random.Generator | int,
) -> tuple[list[Phrase], list[str]]:
    """Balanced cross-dataset sample: ``per_dataset`` phrases from each.

    Datasets with fewer phrases contribute everything they have; their source
    names are returned as warnings. The combined sample is shuffled.
    """
    rng = as_generator(rng)
    sample: list[Phrase] = []
    clamped: list[str] = []
    for phrases in datasets:
        if len(phrases) <= per_dataset:
            if len(phrases) < per_dataset:
                name = phrases[0].source if phrases else "<empty>"
                clamped.append(name)
            sample.extend(phrases)
        else:
            idx = rng.choice(len(phrases), size=per_dataset, replace=False)
            sample.extend(phrases[i] for i in sorted(idx))
    order = rng.permutation(len(sample))
    return [sample[i] for i in order], clamped


# --- RNG plumbing -----------------------------------------------------------


def _seed_words(seed: int, tags) -> list[int]:
    words = [int(seed)]
    for tag in tags:
        if isinstance(tag, str):
            words.append(int.from_bytes(tag.encode("utf8"), "little") % (2**63))
        else:
            words.append(int(tag))
    return words


def derive_rng(seed: int, *tags) -> np.random.Generator:
    """Deterministic sub-stream keyed on (seed, tags); strings are hashed."""
    return np.random.Generator(np.random.PCG64(np.random.SeedSequence(_seed_words(seed, tags))))


def derive_seed(seed: int, *tags) -> int:
    """A plain integer seed derived from (seed, tags), for APIs that take ints."""
    ss = np.random.SeedSequence(_seed_words(seed, tags))
    return int(ss.generate_state(1, np.uint64)[0] % (2**63))


def effective_seed(rng: np.random.Generator | int) -> int:
    """Collapse an rng-or-seed argument to a recordable integer seed."""
    if isinstance(rng, np.random.Generator):
        return int(rng.integers(0, 2**63 - 1))
    return int(rng)


def as_generator(rng: np.random.Generator | int) -> np.random.Generator:
    if isinstance(rng, np.random.Generator):
        return rng
    return np.random.Generator(np.random.PCG64(int(rng)))


# --- JSONL persistence ------------------------------------------------------


def _melody_to_obj(m: Melody) -> dict:
    return {
        "id": m.id,
        "pitches": [n.pitch for n in m.notes],
        "durations": [repr(n.duration) for n in m.notes],
        "phrase_ends": list(m.phrase_ends),
        "tonic": m.tonic,
        "source": m.source,
    }


def _melody_from_obj(obj: dict) -> Melody:
    notes = [Note(int(p), float(d)) for p, d in zip(obj["pitches"], obj["durations"])]
    return Melody(
        id=obj["id"],
        notes=notes,
        phrase_ends=[int(e) for e in obj.get("phrase_ends") or []],
        tonic=obj.get("tonic"),
        source=obj.get("source", ""),
    )


def write_melodies(path, melodies: Iterable[Melody]) -> None:
    with open(path, "w", encoding="utf8") as fh:
        for m in melodies:
            fh.write(json.dumps(_melody_to_obj(m)) + "\n")


def read_melodies(path) -> list[Melody]:
    out = []
    with open(path, encoding="utf8") as fh:
        for line in fh:
            line = line.strip()
            if line:
                out.append(_melody_from_obj(json.loads(line)))
    return out


def _phrase_to_obj(p: Phrase, cluster: Optional[int] = None) -> dict:
    obj = {
        "id": p.id,
        "pitches": [n.pitch for n in p.notes],
        "durations": [repr(n.duration) for n in p.notes],
        "tonic": p.tonic,
        "source": p.source,
    }
    if cluster is not None:
        obj["cluster"] = int(cluster)
    return obj


def write_phrases(path, phrases: Iterable[Phrase], clusters=None) -> None:
    phrases = list(phrases)
    if clusters is None:
        clusters = [None] * len(phrases)
    with open(path, "w", encoding="utf8") as fh:
        for p, c in zip(phrases, clusters):
            fh.write(json.dumps(_phrase_to_obj(p, c)) + "\n")


def read_phrases(path) -> list[Phrase]:
    out = []
    with open(path, encoding="utf8") as fh:
        for line in fh:
            line = line.strip()
            if not line:
                continue
            obj = json.loads(line)
            notes = [Note(int(p), float(d)) for p, d in zip(obj["pitches"], obj["durations"])]
            out.append(Phrase(id=obj["id"], notes=notes, tonic=obj.get("tonic"), source=obj.get("source", "")))
    return out


def read_phrases_or_melodies(path) -> list[Phrase]:
    """Load a JSONL corpus as phrases, extracting them if records are melodies."""
    phrases: list[Phrase] = []
    with open(path, encoding="utf8") as fh:
        for line in fh:
            line = line.strip()
            if not line:
                continue
            obj = json.loads(line)
            if obj.get("phrase_ends"):
                phrases.extend(extract_phrases(_melody_from_obj(obj)))
            else:
                notes = [Note(int(p), float(d)) for p, d in zip(obj["pitches"], obj["durations"])]
                phrases.append(
                    Phrase(id=obj["id"], notes=notes, tonic=obj.get("tonic"), source=obj.get("source", ""))
                )
    return phrases


def load_kern_dir(path, source: Optional[str] = None) -> list[Melody]:
    """Parse every ``.krn`` file in a directory, sorted by filename."""
    path = Path(path)
    if not path.is_dir():
        raise FileNotFoundError(f"kern directory {path} does not exist")
    melodies = []
    for f in sorted(path.glob("*.krn")):
        melodies.append(parse_kern(f.read_text(encoding="utf8"), id=f.stem, source=source or path.name))
    return melodies
