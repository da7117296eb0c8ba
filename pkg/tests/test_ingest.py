import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from contourlab.ingest import (
    Melody,
    Note,
    ParseError,
    Phrase,
    UnsupportedInputError,
    aggregate_sample,
    derive_rng,
    derive_seed,
    extract_phrases,
    load_kern_dir,
    parse_kern,
    random_segments,
    read_melodies,
    read_phrases,
    read_phrases_or_melodies,
    segment_corpus,
    write_melodies,
    write_phrases,
)


def kern(*tokens):
    return "**kern\n" + "\n".join(tokens) + "\n*-\n"


class TestParseKern:
    def test_middle_c_octaves(self):
        mel = parse_kern(kern("4c", "4cc", "4C", "4CC", "4ccc"))
        assert [n.pitch for n in mel.notes] == [60, 72, 48, 36, 84]

    def test_pitch_classes_and_accidentals(self):
        mel = parse_kern(kern("4d", "4e-", "4f#", "4bn", "4B-"))
        assert [n.pitch for n in mel.notes] == [62, 63, 66, 71, 58]

    def test_durations_with_dots(self):
        mel = parse_kern(kern("4c", "8c", "2.c", "1c", "16.c", "4..c"))
        assert [n.duration for n in mel.notes] == [1.0, 0.5, 3.0, 4.0, 0.375, 1.75]

    def test_rests_skipped_but_phrase_preserved(self):
        mel = parse_kern(kern("{4c", "4r", "4d}", "{4e", "4r}"))
        assert [n.pitch for n in mel.notes] == [60, 62, 64]
        # the rest carries the closing mark; it lands on the last real note
        assert mel.phrase_ends == [1, 2]

    def test_tie_merges_equal_pitch(self):
        mel = parse_kern(kern("[2c", "2c]", "4d"))
        assert mel.notes == [Note(60, 4.0), Note(62, 1.0)]

    def test_tie_chain_with_continuation(self):
        mel = parse_kern(kern("[2c", "2c_", "4c]"))
        assert mel.notes == [Note(60, 5.0)]

    def test_tie_of_different_pitches_not_merged(self):
        mel = parse_kern(kern("[2c", "2d]"))
        assert [n.pitch for n in mel.notes] == [60, 62]

    def test_tonic_interpretation(self):
        assert parse_kern(kern("*G:", "4c")).tonic == 67
        assert parse_kern(kern("*e-:", "4c")).tonic == 63
        assert parse_kern(kern("4c")).tonic is None

    def test_comments_barlines_and_unknown_interps_ignored(self):
        mel = parse_kern(kern("!! a comment", "*M4/4", "4c", "=1", "4d", "=="))
        assert [n.pitch for n in mel.notes] == [60, 62]

    def test_terminator_stops_parsing(self):
        mel = parse_kern("**kern\n4c\n*-\n4d\n")
        assert [n.pitch for n in mel.notes] == [60]

    def test_multiple_spines_rejected(self):
        with pytest.raises(UnsupportedInputError):
            parse_kern("**kern\t**kern\n4c\t4e\n")

    def test_malformed_token_reports_line(self):
        with pytest.raises(ParseError, match="line 3"):
            parse_kern("**kern\n4c\nnonsense\n")

    def test_mixed_pitch_letters_rejected(self):
        with pytest.raises(ParseError):
            parse_kern(kern("4cd"))

    def test_zero_duration_rejected(self):
        with pytest.raises(ParseError):
            parse_kern(kern("0c"))

    def test_out_of_range_pitch_rejected(self):
        with pytest.raises(ParseError):
            parse_kern(kern("4CCCCCC"))

    def test_empty_document_rejected(self):
        with pytest.raises(ParseError):
            parse_kern("**kern\n!! nothing\n*-\n")

    def test_fixture_corpus_parses_clean(self, kern_melodies):
        assert len(kern_melodies) == 20
        for mel in kern_melodies:
            assert mel.notes
            for note in mel.notes:
                assert 0 <= note.pitch <= 127
                assert note.duration > 0


class TestExtractPhrases:
    def test_no_marks_single_phrase(self):
        mel = Melody(id="m", notes=[Note(60, 1.0), Note(62, 1.0)])
        phrases = extract_phrases(mel)
        assert len(phrases) == 1
        assert phrases[0].notes == mel.notes

    def test_marked_split(self):
        notes = [Note(60 + i, 1.0) for i in range(6)]
        mel = Melody(id="m", notes=notes, phrase_ends=[2, 5], tonic=60, source="s")
        phrases = extract_phrases(mel)
        assert [p.length for p in phrases] == [3, 3]
        assert phrases[0].tonic == 60 and phrases[1].source == "s"
        assert [p.id for p in phrases] == ["m-p0", "m-p1"]

    def test_unterminated_tail_becomes_phrase(self):
        notes = [Note(60, 1.0)] * 5
        mel = Melody(id="m", notes=notes, phrase_ends=[1])
        assert [p.length for p in extract_phrases(mel)] == [2, 3]

    def test_note_conservation_on_fixture(self, kern_melodies):
        for mel in kern_melodies:
            phrases = extract_phrases(mel)
            rebuilt = [n for p in phrases for n in p.notes]
            assert rebuilt == mel.notes


class TestRandomSegments:
    def _melody(self, n=120):
        return Melody(id="m", notes=[Note(60 + (i % 12), 1.0) for i in range(n)])

    def test_segments_are_contiguous_interior_runs(self):
        mel = self._melody()
        segs = random_segments(mel, lam=8.0, rng=3)
        assert segs, "120 notes at lam=8 should leave interior segments"
        flat = [n for s in segs for n in s.notes]
        # the concatenation is one contiguous interior slice of the melody
        joined = "".join(f"({n.pitch})" for n in flat)
        full = "".join(f"({n.pitch})" for n in mel.notes)
        assert joined in full
        assert len(flat) < len(mel.notes)
        assert segs[0].notes[0] is not mel.notes[0]
        assert segs[-1].notes[-1] is not mel.notes[-1]

    def test_min_chunk_length(self):
        for seed in range(5):
            for seg in random_segments(self._melody(), lam=4.0, rng=seed):
                assert seg.length >= 2 or seg is None

    def test_deterministic(self):
        a = random_segments(self._melody(), 6.0, rng=42)
        b = random_segments(self._melody(), 6.0, rng=42)
        assert [s.notes for s in a] == [s.notes for s in b]

    def test_bad_lambda(self):
        with pytest.raises(ValueError):
            random_segments(self._melody(), 0.0, rng=0)

    def test_source_tagged(self):
        mel = self._melody()
        mel.source = "corpus"
        for seg in random_segments(mel, 6.0, rng=1):
            assert seg.source == "corpus-segments"

    def test_corpus_segmentation_order_independent(self, kern_melodies):
        forward = segment_corpus(kern_melodies, 6.0, seed=9)
        backward = segment_corpus(list(reversed(kern_melodies)), 6.0, seed=9)
        key = lambda s: s.id
        assert sorted(forward, key=key) == sorted(backward, key=key)


class TestAggregateSample:
    def _sets(self):
        def mk(tag, n):
            return [
                Phrase(id=f"{tag}{i}", notes=[Note(60, 1.0), Note(62, 1.0)], source=tag)
                for i in range(n)
            ]

        return [mk("a", 40), mk("b", 40), mk("c", 5)]

    def test_balanced_counts_and_warning(self):
        sample, warnings = aggregate_sample(self._sets(), per_dataset=10, rng=0)
        by_source = {}
        for p in sample:
            by_source[p.source] = by_source.get(p.source, 0) + 1
        assert by_source == {"a": 10, "b": 10, "c": 5}
        assert warnings == ["c"]

    def test_deterministic_shuffle(self):
        s1, _ = aggregate_sample(self._sets(), per_dataset=10, rng=5)
        s2, _ = aggregate_sample(self._sets(), per_dataset=10, rng=5)
        assert [p.id for p in s1] == [p.id for p in s2]
        s3, _ = aggregate_sample(self._sets(), per_dataset=10, rng=6)
        assert [p.id for p in s1] != [p.id for p in s3]


class TestJsonl:
    def test_melody_round_trip_fixture(self, melodies_jsonl, tmp_path):
        melodies = read_melodies(melodies_jsonl)
        assert len(melodies) == 10
        out = tmp_path / "again.jsonl"
        write_melodies(out, melodies)
        assert read_melodies(out) == melodies

    def test_phrase_round_trip(self, kern_phrases, tmp_path):
        out = tmp_path / "phrases.jsonl"
        write_phrases(out, kern_phrases)
        assert read_phrases(out) == kern_phrases

    def test_read_either_kind(self, melodies_jsonl, kern_phrases, tmp_path):
        # melody records are split into their phrases on read
        phrases = read_phrases_or_melodies(melodies_jsonl)
        assert len(phrases) == 34
        melodies = read_melodies(melodies_jsonl)
        assert sum(len(m.notes) for m in melodies) == sum(p.length for p in phrases)
        out = tmp_path / "phrases.jsonl"
        write_phrases(out, kern_phrases[:3])
        assert read_phrases_or_melodies(out) == kern_phrases[:3]

    @given(
        pitches=st.lists(st.integers(0, 127), min_size=1, max_size=20),
        quarters=st.integers(1, 4),
    )
    @settings(max_examples=50, deadline=None)
    def test_melody_round_trip_property(self, tmp_path_factory, pitches, quarters):
        notes = [Note(p, quarters * 0.25) for p in pitches]
        ends = [i for i in range(len(notes)) if i % 3 == 2]
        mel = Melody(id="m", notes=notes, phrase_ends=ends, tonic=62, source="x")
        path = tmp_path_factory.mktemp("jsonl") / "m.jsonl"
        write_melodies(path, [mel])
        assert read_melodies(path) == [mel]


class TestSeeds:
    def test_derive_rng_deterministic(self):
        a = derive_rng(7, "alpha", 3).integers(0, 1 << 30, size=4)
        b = derive_rng(7, "alpha", 3).integers(0, 1 << 30, size=4)
        assert np.array_equal(a, b)

    def test_derive_rng_tag_sensitivity(self):
        base = derive_rng(7, "alpha").integers(0, 1 << 30, size=4)
        other = derive_rng(7, "beta").integers(0, 1 << 30, size=4)
        assert not np.array_equal(base, other)

    def test_derive_seed_range(self):
        for tag in ("x", "y", 12):
            s = derive_seed(123, tag)
            assert isinstance(s, int) and 0 <= s < 2**63


class TestLoadKernDir:
    def test_loads_sorted_with_ids(self, kern_dir):
        melodies = load_kern_dir(kern_dir)
        ids = [m.id for m in melodies]
        assert ids == sorted(ids)
        assert ids[0] == "chant01"
        assert all(m.source for m in melodies)

    def test_missing_dir(self, tmp_path):
        with pytest.raises(OSError):
            load_kern_dir(tmp_path / "nope")
