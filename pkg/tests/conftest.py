import sys
from pathlib import Path

import pytest

sys.path.insert(0, str(Path(__file__).parent))

from contourlab.ingest import extract_phrases, load_kern_dir
from contourlab.synth import MarkovContourModel, sample_uniform

FIXTURES = Path(__file__).parent / "fixtures"


@pytest.fixture(scope="session")
def kern_dir() -> Path:
    return FIXTURES / "kern"


@pytest.fixture(scope="session")
def melodies_jsonl() -> Path:
    return FIXTURES / "melodies10.jsonl"


@pytest.fixture(scope="session")
def kern_melodies(kern_dir):
    return load_kern_dir(kern_dir)


@pytest.fixture(scope="session")
def kern_phrases(kern_melodies):
    return [ph for mel in kern_melodies for ph in extract_phrases(mel)]


@pytest.fixture(scope="session")
def chain(kern_phrases) -> MarkovContourModel:
    return MarkovContourModel().fit(kern_phrases)


@pytest.fixture(scope="session")
def uniform_600(chain):
    """A small reusable uniform synthetic corpus."""
    return sample_uniform(chain, 600, rng=11)
