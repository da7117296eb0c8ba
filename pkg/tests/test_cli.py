import json

import numpy as np
import pytest
from click.testing import CliRunner

from contourlab.cli import main
from contourlab.ingest import read_phrases, write_phrases


@pytest.fixture(scope="module")
def runner():
    return CliRunner()


@pytest.fixture(scope="module")
def phrases_file(tmp_path_factory, kern_phrases):
    path = tmp_path_factory.mktemp("cli") / "phrases.jsonl"
    write_phrases(path, kern_phrases)
    return path


def ok(result):
    assert result.exit_code == 0, result.stderr or result.output
    return result


class TestTopLevel:
    def test_version(self, runner):
        result = ok(runner.invoke(main, ["--version"]))
        assert "0.1.0" in result.output

    def test_help_lists_commands(self, runner):
        result = ok(runner.invoke(main, ["--help"]))
        for cmd in (
            "ingest", "contours", "synth", "synth-clustered", "distances",
            "embed", "diptest", "distdip", "typology", "epsilon-sweep",
            "kmeans", "average", "run", "render",
        ):
            assert cmd in result.output


class TestIngest:
    def test_kern_directory(self, runner, kern_dir, tmp_path):
        out = tmp_path / "phrases.jsonl"
        mel = tmp_path / "melodies.jsonl"
        seg = tmp_path / "segments.jsonl"
        result = ok(
            runner.invoke(
                main,
                [
                    "ingest", "--in", str(kern_dir), "--format", "kern",
                    "--phrases", str(out), "--melodies", str(mel),
                    "--segments", str(seg), "--lambda", "6", "--seed", "3",
                ],
            )
        )
        assert "65 phrases from 20 melodies" in result.stderr
        assert len(read_phrases(out)) == 65
        assert mel.exists() and seg.exists()
        assert len(read_phrases(seg)) > 0

    def test_jsonl_melodies(self, runner, melodies_jsonl, tmp_path):
        out = tmp_path / "phrases.jsonl"
        result = ok(
            runner.invoke(
                main,
                ["ingest", "--in", str(melodies_jsonl), "--format", "jsonl",
                 "--phrases", str(out)],
            )
        )
        assert "34 phrases from 10 melodies" in result.stderr

    def test_kern_needs_directory(self, runner, melodies_jsonl, tmp_path):
        result = runner.invoke(
            main,
            ["ingest", "--in", str(melodies_jsonl), "--format", "kern",
             "--phrases", str(tmp_path / "x.jsonl")],
        )
        assert result.exit_code == 1
        assert "expects a directory" in result.stderr


class TestContours:
    def test_writes_vectors(self, runner, phrases_file, tmp_path):
        out = tmp_path / "contours.jsonl"
        ok(
            runner.invoke(
                main,
                ["contours", "--in", str(phrases_file), "--repr", "centered",
                 "--out", str(out)],
            )
        )
        lines = [json.loads(l) for l in out.read_text().splitlines()]
        assert len(lines) == 65
        assert all(len(l["values"]) == 50 for l in lines)
        assert {l["representation"] for l in lines} == {"centered"}

    def test_cosine_truncation_flag(self, runner, phrases_file, tmp_path):
        out = tmp_path / "cos.jsonl"
        ok(
            runner.invoke(
                main,
                ["contours", "--in", str(phrases_file), "--representation",
                 "cosine", "--n-coef", "10", "--out", str(out)],
            )
        )
        first = json.loads(out.read_text().splitlines()[0])
        assert len(first["values"]) == 10

    def test_rejects_contour_input(self, runner, phrases_file, tmp_path):
        out = tmp_path / "c.jsonl"
        ok(runner.invoke(main, ["contours", "--in", str(phrases_file), "--out", str(out)]))
        result = runner.invoke(
            main, ["contours", "--in", str(out), "--out", str(tmp_path / "d.jsonl")]
        )
        assert result.exit_code == 1
        assert "already contains contour vectors" in result.stderr


class TestSynth:
    def test_sample_deterministic(self, runner, phrases_file, tmp_path):
        a = tmp_path / "a.jsonl"
        b = tmp_path / "b.jsonl"
        for out in (a, b):
            ok(
                runner.invoke(
                    main,
                    ["synth", "--fit", str(phrases_file), "--count", "40",
                     "--seed", "5", "--out", str(out)],
                )
            )
        assert a.read_bytes() == b.read_bytes()
        assert len(read_phrases(a)) == 40

    def test_clustered_subset(self, runner, phrases_file, tmp_path):
        pool = tmp_path / "pool.jsonl"
        ok(
            runner.invoke(
                main,
                ["synth", "--fit", str(phrases_file), "--count", "150",
                 "--seed", "1", "--out", str(pool)],
            )
        )
        out = tmp_path / "clustered.jsonl"
        result = ok(
            runner.invoke(
                main,
                ["synth-clustered", "--in", str(pool), "--k", "3",
                 "--keep", "60", "--seed", "2", "--out", str(out)],
            )
        )
        assert "60 phrases (3 clusters)" in result.stderr
        records = [json.loads(l) for l in out.read_text().splitlines()]
        assert len(records) == 60
        assert {r["cluster"] for r in records} == {0, 1, 2}

    def test_clustered_validation(self, runner, phrases_file, tmp_path):
        result = runner.invoke(
            main,
            ["synth-clustered", "--in", str(phrases_file), "--k", "5",
             "--keep", "2", "--out", str(tmp_path / "x.jsonl")],
        )
        assert result.exit_code == 1
        assert "keep" in result.stderr


class TestDistancesAndDip:
    def test_distance_csv_then_diptest(self, runner, phrases_file, tmp_path):
        csv = tmp_path / "d.csv"
        result = ok(
            runner.invoke(
                main,
                ["distances", "--in", str(phrases_file), "--metric", "euclidean",
                 "--m", "400", "--seed", "9", "--out", str(csv)],
            )
        )
        assert "400 distances" in result.stderr
        lines = csv.read_text().splitlines()
        assert lines[0].startswith("# metric=euclidean")
        assert lines[1] == "value"
        assert len(lines) == 402

        result = ok(
            runner.invoke(
                main, ["diptest", "--in", str(csv), "--replicates", "60", "--seed", "4"]
            )
        )
        obj = json.loads(result.output)
        assert obj["n"] == 400 and obj["replicates"] == 60
        assert 0 < obj["p_value"] <= 1

    def test_distances_deterministic(self, runner, phrases_file, tmp_path):
        a, b = tmp_path / "a.csv", tmp_path / "b.csv"
        for out in (a, b):
            ok(
                runner.invoke(
                    main,
                    ["distances", "--in", str(phrases_file), "--metric", "dtw",
                     "--m", "120", "--seed", "2", "--out", str(out)],
                )
            )
        assert a.read_bytes() == b.read_bytes()

    def test_dtw_on_cosine_rejected(self, runner, phrases_file, tmp_path):
        cos = tmp_path / "cos.jsonl"
        ok(runner.invoke(main, ["contours", "--in", str(phrases_file), "--repr",
                                "cosine", "--out", str(cos)]))
        result = runner.invoke(
            main,
            ["distances", "--in", str(cos), "--metric", "dtw", "--m", "10",
             "--out", str(tmp_path / "x.csv")],
        )
        assert result.exit_code == 1
        assert "not meaningful" in result.stderr

    def test_distdip_json_file(self, runner, phrases_file, tmp_path):
        out = tmp_path / "dip.json"
        ok(
            runner.invoke(
                main,
                ["distdip", "--in", str(phrases_file), "--metric", "euclidean",
                 "--m", "300", "--replicates", "50", "--seed", "1",
                 "--json", str(out)],
            )
        )
        obj = json.loads(out.read_text())
        assert obj["metric"] == "euclidean" and obj["n"] == 300


class TestEmbedCli:
    def test_pca_csv(self, runner, phrases_file, tmp_path):
        out = tmp_path / "pca.csv"
        ok(
            runner.invoke(
                main,
                ["embed", "--in", str(phrases_file), "--method", "pca",
                 "--dim", "3", "--out", str(out)],
            )
        )
        lines = out.read_text().splitlines()
        assert lines[0] == "id,c0,c1,c2"
        assert len(lines) == 66
        first = lines[1].split(",")
        assert first[0] == "chant01-p0"
        float(first[1])

    def test_umap_csv(self, runner, phrases_file, tmp_path):
        out = tmp_path / "umap.csv"
        ok(
            runner.invoke(
                main,
                ["embed", "--in", str(phrases_file), "--method", "umap",
                 "--dim", "2", "--seed", "3", "--out", str(out)],
            )
        )
        lines = out.read_text().splitlines()
        assert lines[0] == "id,c0,c1"
        assert len(lines) == 66


class TestTypologyCli:
    def test_huron_counts(self, runner, phrases_file):
        result = ok(runner.invoke(main, ["typology", "--in", str(phrases_file)]))
        obj = json.loads(result.output)
        assert obj["typology"] == "huron"
        assert obj["total"] == 65
        assert sum(obj["counts"].values()) == 65

    def test_adams_needs_phrases(self, runner, phrases_file, tmp_path):
        cos = tmp_path / "c.jsonl"
        ok(runner.invoke(main, ["contours", "--in", str(phrases_file), "--out", str(cos)]))
        result = runner.invoke(
            main, ["typology", "--in", str(cos), "--typology", "adams"]
        )
        assert result.exit_code == 1
        assert "raw phrases" in result.stderr

    def test_epsilon_sweep_grid(self, runner, phrases_file, tmp_path):
        out = tmp_path / "sweep.json"
        ok(
            runner.invoke(
                main,
                ["epsilon-sweep", "--in", str(phrases_file), "--grid", "0:2:0.5",
                 "--json", str(out)],
            )
        )
        obj = json.loads(out.read_text())
        assert obj["epsilons"] == [0.0, 0.5, 1.0, 1.5, 2.0]
        assert len(obj["entropies"]) == 5
        assert obj["best_epsilon"] in obj["epsilons"]

    def test_bad_grid(self, runner, phrases_file):
        result = runner.invoke(
            main, ["epsilon-sweep", "--in", str(phrases_file), "--grid", "4:0:1"]
        )
        assert result.exit_code == 1
        assert "--grid" in result.stderr

    def test_kmeans_labels(self, runner, phrases_file):
        result = ok(
            runner.invoke(main, ["kmeans", "--in", str(phrases_file), "--k", "3"])
        )
        obj = json.loads(result.output)
        assert obj["k"] == 3
        assert len(obj["labels"]) == 65
        assert set(obj["labels"].values()) == {0, 1, 2}
        assert len(obj["centroids"]) == 3

    def test_kmeans_k_too_big(self, runner, phrases_file):
        result = runner.invoke(
            main, ["kmeans", "--in", str(phrases_file), "--k", "999"]
        )
        assert result.exit_code == 1

    def test_average_grouped(self, runner, phrases_file):
        result = ok(
            runner.invoke(
                main, ["average", "--in", str(phrases_file), "--by", "huron"]
            )
        )
        obj = json.loads(result.output)
        assert obj["groups"]
        for group in obj["groups"]:
            assert len(group["average"]["mean"]) == 50
            assert group["label"]


@pytest.fixture(scope="module")
def report_path(runner, kern_dir, tmp_path_factory):
    tmp = tmp_path_factory.mktemp("run")
    config = tmp / "config.json"
    config.write_text(
        json.dumps(
            {
                "seed": 11,
                "datasets": {"chants": {"kind": "kern_dir", "path": str(kern_dir)}},
                "representations": ["centered", "cosine"],
                "metrics": ["euclidean", "dtw"],
                "m": 250,
                "replicates": 40,
            }
        )
    )
    out = tmp / "report.json"
    result = runner.invoke(main, ["run", "--config", str(config), "--out", str(out)])
    assert result.exit_code == 0, result.stderr
    return out


class TestRunAndRender:
    def test_run_writes_report_with_progress(self, report_path):
        obj = json.loads(report_path.read_text())
        assert len(obj["cells"]) == 4
        statuses = {c["status"] for c in obj["cells"]}
        assert statuses == {"ok", "skipped"}

    def test_run_rejects_bad_config(self, runner, tmp_path):
        bad = tmp_path / "bad.json"
        bad.write_text(json.dumps({"datasets": {}}))
        result = runner.invoke(
            main, ["run", "--config", str(bad), "--out", str(tmp_path / "r.json")]
        )
        assert result.exit_code == 1

    def test_run_exit_2_on_cell_error(self, runner, kern_phrases, tmp_path):
        few = tmp_path / "few.jsonl"
        write_phrases(few, kern_phrases[:8])
        config = tmp_path / "config.json"
        config.write_text(
            json.dumps(
                {
                    "seed": 1,
                    "datasets": {"few": {"kind": "jsonl", "path": str(few)}},
                    "representations": ["centered"],
                    "metrics": ["umap"],
                    "m": 50,
                    "replicates": 20,
                }
            )
        )
        out = tmp_path / "report.json"
        result = runner.invoke(
            main, ["run", "--config", str(config), "--out", str(out), "--quiet"]
        )
        assert result.exit_code == 2
        assert out.exists()
        obj = json.loads(out.read_text())
        assert obj["cells"][0]["status"] == "error"

    def test_render_grid_and_panel(self, runner, report_path, tmp_path):
        grid = tmp_path / "grid.svg"
        ok(
            runner.invoke(
                main,
                ["render", "--report", str(report_path), "--kind", "grid",
                 "--out", str(grid)],
            )
        )
        assert grid.read_text().startswith("<svg")

        panel = tmp_path / "panel.svg"
        ok(
            runner.invoke(
                main,
                ["render", "--in", str(report_path), "--kind", "panel",
                 "--dataset", "chants", "--repr", "centered",
                 "--metric", "euclidean", "--out", str(panel)],
            )
        )
        text = panel.read_text()
        assert "chants | centered | euclidean" in text

    def test_render_panel_needs_unique_cell(self, runner, report_path, tmp_path):
        result = runner.invoke(
            main,
            ["render", "--report", str(report_path), "--kind", "panel",
             "--out", str(tmp_path / "p.svg")],
        )
        assert result.exit_code == 1

    def test_render_out_directory(self, runner, report_path, tmp_path):
        outdir = tmp_path / "figs"
        outdir.mkdir()
        ok(
            runner.invoke(
                main,
                ["render", "--report", str(report_path), "--kind", "grid",
                 "--out", str(outdir)],
            )
        )
        assert (outdir / "grid.svg").exists()

    def test_render_epsilon_and_average(self, runner, phrases_file, tmp_path):
        sweep = tmp_path / "sweep.json"
        ok(
            runner.invoke(
                main,
                ["epsilon-sweep", "--in", str(phrases_file), "--grid", "0:1:0.5",
                 "--json", str(sweep)],
            )
        )
        svg = tmp_path / "eps.svg"
        ok(
            runner.invoke(
                main,
                ["render", "--in", str(sweep), "--kind", "epsilon", "--out", str(svg)],
            )
        )
        assert "max entropy" in svg.read_text()

        avg = tmp_path / "avg.json"
        ok(runner.invoke(main, ["average", "--in", str(phrases_file), "--out", str(avg)]))
        avg_svg = tmp_path / "avg.svg"
        ok(
            runner.invoke(
                main,
                ["render", "--in", str(avg), "--kind", "average", "--out", str(avg_svg)],
            )
        )
        assert "<polygon" in avg_svg.read_text()
