"""Command-line interface.

Subcommands mirror the library stages: ingest corpora into phrases, derive
contour vectors, synthesize control corpora, sample distances, embed, test
for multimodality, classify into typologies, and run whole experiment grids
with rendered figures. All randomized commands take an integer --seed and
are fully reproducible.
"""

from __future__ import annotations

import json
import sys
from pathlib import Path

import click
import numpy as np

from . import contour as contour_mod
from . import ingest as ingest_mod
from .embed import PcaModel, UmapModel
from .metrics import METRICS, pairwise_sample
from .pipeline import (
    VERSION,
    ConfigError,
    load_config,
    read_report,
    run_experiment,
    write_report,
)
from .render import render_average, render_epsilon, render_grid, render_panel
from .stats import dip_test
from .synth import MarkovContourModel, make_clustered
from .typology import average_contour, huron_type, kmeans, max_entropy_epsilon, type_distribution

__all__ = ["main"]


def _fail(message: str, code: int = 1):
    click.echo(f"error: {message}", err=True)
    sys.exit(code)


def _dump(obj, out):
    text = json.dumps(obj, sort_keys=True, indent=2) + "\n"
    if out:
        with open(out, "w", encoding="utf8") as fh:
            fh.write(text)
    else:
        click.echo(text, nl=False)


def _load_records(path):
    """Classify a JSONL corpus as ('contours'|'phrases', records)."""
    with open(path, encoding="utf8") as fh:
        first = ""
        for line in fh:
            line = line.strip()
            if line:
                first = line
                break
    if not first:
        _fail(f"{path}: empty corpus")
    obj = json.loads(first)
    if "values" in obj:
        return "contours", contour_mod.read_contours(path)
    return "phrases", ingest_mod.read_phrases_or_melodies(path)


def _as_contours(path, representation: str, n: int, n_coef):
    kind, records = _load_records(path)
    if kind == "contours":
        return records
    return [
        contour_mod.phrase_to_contour(ph, representation, n=n, n_coef=n_coef)
        for ph in records
    ]


def _typology_items(path, typology_name: str, n: int):
    kind, records = _load_records(path)
    if typology_name == "adams":
        if kind == "contours":
            _fail("the boundary-pitch typology needs raw phrases, not contour vectors")
        return records
    if kind == "contours":
        return records
    return [contour_mod.phrase_to_contour(ph, "pitch", n=n) for ph in records]


@click.group()
@click.version_option(version=VERSION, prog_name="contour-lab")
def main():
    """Tools for testing whether melodic phrase contours cluster into types."""


# --- corpus commands --------------------------------------------------------


@main.command()
@click.option("--in", "in_path", type=click.Path(exists=True), required=True, help="Kern directory or melodies JSONL.")
@click.option("--format", "fmt", type=click.Choice(["kern", "jsonl"]), default="kern", show_default=True)
@click.option("--phrases", "phrases_out", type=click.Path(), required=True, help="Output phrase JSONL.")
@click.option("--melodies", "melodies_out", type=click.Path(), default=None, help="Also write the melody JSONL.")
@click.option("--segments", "segments_out", type=click.Path(), default=None, help="Also write random segments JSONL.")
@click.option("--lambda", "lam", type=float, default=10.0, show_default=True, help="Poisson mean for segment lengths.")
@click.option("--seed", default=0, show_default=True)
@click.option("--source", default=None, help="Source tag stored on each melody.")
def ingest(in_path, fmt, phrases_out, melodies_out, segments_out, lam, seed, source):
    """Parse a corpus into phrases (and optionally melodies and segments)."""
    try:
        if fmt == "kern":
            if not Path(in_path).is_dir():
                _fail("--format kern expects a directory of .krn files")
            melodies = ingest_mod.load_kern_dir(in_path, source=source)
        else:
            melodies = ingest_mod.read_melodies(in_path)
            if source:
                for m in melodies:
                    m.source = source
    except ingest_mod.ParseError as exc:
        _fail(str(exc))
    if not melodies:
        _fail(f"no melodies found in {in_path}")
    phrases = [ph for mel in melodies for ph in ingest_mod.extract_phrases(mel)]
    ingest_mod.write_phrases(phrases_out, phrases)
    click.echo(f"wrote {len(phrases)} phrases from {len(melodies)} melodies to {phrases_out}", err=True)
    if melodies_out:
        ingest_mod.write_melodies(melodies_out, melodies)
        click.echo(f"wrote {len(melodies)} melodies to {melodies_out}", err=True)
    if segments_out:
        segments = ingest_mod.segment_corpus(melodies, lam, seed)
        ingest_mod.write_phrases(segments_out, segments)
        click.echo(f"wrote {len(segments)} segments to {segments_out}", err=True)


@main.command()
@click.option("--in", "in_path", type=click.Path(exists=True), required=True)
@click.option(
    "--repr",
    "--representation",
    "representation",
    type=click.Choice(contour_mod.REPRESENTATIONS),
    default="centered",
    show_default=True,
)
@click.option("--n", default=contour_mod.DEFAULT_N, show_default=True)
@click.option("--n-coef", default=None, type=int, help="Cosine coefficient count.")
@click.option("--out", type=click.Path(), required=True)
def contours(in_path, representation, n, n_coef, out):
    """Convert melodies or phrases to contour vectors."""
    kind, records = _load_records(in_path)
    if kind == "contours":
        _fail(f"{in_path} already contains contour vectors")
    try:
        vectors = [
            contour_mod.phrase_to_contour(ph, representation, n=n, n_coef=n_coef)
            for ph in records
        ]
    except (ValueError, contour_mod.MissingMetadataError) as exc:
        _fail(str(exc))
    contour_mod.write_contours(out, vectors)
    click.echo(f"wrote {len(vectors)} contours to {out}", err=True)


@main.command()
@click.option("--fit", "fit_path", type=click.Path(exists=True), required=True, help="Training phrase corpus.")
@click.option("--count", default=1000, show_default=True)
@click.option("--seed", default=0, show_default=True)
@click.option("--source", default="synthetic-uniform", show_default=True)
@click.option("--out", type=click.Path(), required=True)
def synth(fit_path, count, seed, source, out):
    """Sample an unclustered synthetic phrase corpus from a fitted chain."""
    _, phrases = _load_records(fit_path)
    model = MarkovContourModel().fit(phrases)
    sampled = model.sample(count, rng=ingest_mod.derive_rng(seed, "synth"), source=source)
    ingest_mod.write_phrases(out, sampled)
    click.echo(f"wrote {len(sampled)} phrases to {out}", err=True)


@main.command(name="synth-clustered")
@click.option("--in", "in_path", type=click.Path(exists=True), required=True, help="Uniform synthetic pool JSONL.")
@click.option("--k", default=5, show_default=True)
@click.option("--keep", default=1000, show_default=True, help="Phrases to keep.")
@click.option("--seed", default=0, show_default=True)
@click.option("--out", type=click.Path(), required=True)
def synth_clustered(in_path, k, keep, seed, out):
    """Select an artificially clustered subset from a synthetic pool."""
    _, phrases = _load_records(in_path)
    try:
        chosen, labels = make_clustered(
            phrases, k=k, pool=len(phrases), keep=keep, rng=ingest_mod.derive_seed(seed, "cluster")
        )
    except ValueError as exc:
        _fail(str(exc))
    ingest_mod.write_phrases(out, chosen, clusters=labels)
    click.echo(f"wrote {len(chosen)} phrases ({k} clusters) to {out}", err=True)


# --- distances and embeddings -----------------------------------------------


@main.command()
@click.option("--in", "in_path", type=click.Path(exists=True), required=True)
@click.option("--metric", type=click.Choice(METRICS), required=True)
@click.option("--repr", "--representation", "representation", default="centered", show_default=True, help="Used when the input is phrases.")
@click.option("--m", default=30000, show_default=True)
@click.option("--seed", default=0, show_default=True)
@click.option("--umap-dim", default=10, show_default=True)
@click.option("--n", default=contour_mod.DEFAULT_N, show_default=True)
@click.option("--out", type=click.Path(), required=True, help="Output distance CSV.")
def distances(in_path, metric, representation, m, seed, umap_dim, n, out):
    """Sample pairwise distances between contours into a CSV file."""
    vectors = _as_contours(in_path, representation, n, None)
    embedding = None
    try:
        if metric == "umap":
            matrix = contour_mod.contour_matrix(vectors)
            model = UmapModel(target_dim=umap_dim, seed=ingest_mod.derive_seed(seed, "umap"))
            embedding = model.fit(matrix).embedding_
        sample = pairwise_sample(
            vectors, metric, m=m, rng=ingest_mod.derive_seed(seed, "pairs"), embedding=embedding
        )
    except ValueError as exc:
        _fail(str(exc))
    with open(out, "w", encoding="utf8") as fh:
        fh.write(
            f"# metric={sample.metric} representation={sample.representation} "
            f"dataset={sample.dataset} pair_seed={sample.pair_seed} m={m}\n"
        )
        fh.write("value\n")
        for v in sample.values:
            fh.write(repr(float(v)) + "\n")
    click.echo(f"wrote {len(sample.values)} distances to {out}", err=True)


@main.command()
@click.option("--in", "in_path", type=click.Path(exists=True), required=True)
@click.option("--method", type=click.Choice(["pca", "umap"]), default="umap", show_default=True)
@click.option("--dim", default=10, show_default=True)
@click.option("--seed", default=0, show_default=True)
@click.option("--repr", "--representation", "representation", default="centered", show_default=True)
@click.option("--n", default=contour_mod.DEFAULT_N, show_default=True)
@click.option("--out", type=click.Path(), required=True, help="Output coordinate CSV.")
def embed(in_path, method, dim, seed, representation, n, out):
    """Project contours to low-dimensional coordinates (CSV: id, c0, c1, ...)."""
    vectors = _as_contours(in_path, representation, n, None)
    matrix = contour_mod.contour_matrix(vectors)
    try:
        if method == "pca":
            coords = PcaModel(n_components=dim).fit(matrix).transform(matrix)
        else:
            coords = UmapModel(target_dim=dim, seed=seed).fit(matrix).embedding_
    except ValueError as exc:
        _fail(str(exc))
    with open(out, "w", encoding="utf8") as fh:
        fh.write("id," + ",".join(f"c{d}" for d in range(coords.shape[1])) + "\n")
        for vec, row in zip(vectors, coords):
            fh.write(vec.id + "," + ",".join(repr(float(x)) for x in row) + "\n")
    click.echo(f"wrote {coords.shape[0]}x{coords.shape[1]} coordinates to {out}", err=True)


# --- dip tests --------------------------------------------------------------


def _read_values_csv(path) -> np.ndarray:
    values = []
    with open(path, encoding="utf8") as fh:
        for line in fh:
            line = line.strip()
            if not line or line.startswith("#") or line == "value":
                continue
            values.append(float(line))
    if not values:
        _fail(f"{path}: no values")
    return np.asarray(values)


@main.command()
@click.option("--in", "in_path", type=click.Path(exists=True), required=True, help="Distance CSV (one value per line).")
@click.option("--replicates", default=2000, show_default=True)
@click.option("--seed", default=0, show_default=True)
@click.option("--json", "--out", "out", type=click.Path(), default=None, help="Output JSON path (default stdout).")
def diptest(in_path, replicates, seed, out):
    """Dip test of a stored distance sample."""
    values = _read_values_csv(in_path)
    try:
        result = dip_test(values, replicates=replicates, rng=seed)
    except ValueError as exc:
        _fail(str(exc))
    _dump(result.to_obj(), out)


@main.command()
@click.option("--in", "in_path", type=click.Path(exists=True), required=True)
@click.option("--metric", type=click.Choice(METRICS), required=True)
@click.option("--repr", "--representation", "representation", default="centered", show_default=True)
@click.option("--m", default=30000, show_default=True)
@click.option("--replicates", default=2000, show_default=True)
@click.option("--seed", default=0, show_default=True)
@click.option("--umap-dim", default=10, show_default=True)
@click.option("--n", default=contour_mod.DEFAULT_N, show_default=True)
@click.option("--json", "--out", "out", type=click.Path(), default=None, help="Output JSON path (default stdout).")
def distdip(in_path, metric, representation, m, replicates, seed, umap_dim, n, out):
    """Multimodality test on sampled pairwise contour distances."""
    vectors = _as_contours(in_path, representation, n, None)
    embedding = None
    try:
        if metric == "umap":
            matrix = contour_mod.contour_matrix(vectors)
            model = UmapModel(target_dim=umap_dim, seed=ingest_mod.derive_seed(seed, "umap"))
            embedding = model.fit(matrix).embedding_
        sample = pairwise_sample(
            vectors, metric, m=m, rng=ingest_mod.derive_seed(seed, "pairs"), embedding=embedding
        )
        result = dip_test(sample.values, replicates=replicates, rng=ingest_mod.derive_seed(seed, "null"))
    except ValueError as exc:
        _fail(str(exc))
    obj = result.to_obj()
    obj.update({"metric": metric, "representation": representation, "seed": seed})
    _dump(obj, out)


# --- typologies -------------------------------------------------------------


@main.command()
@click.option("--in", "in_path", type=click.Path(exists=True), required=True)
@click.option("--typology", "typology_name", type=click.Choice(["huron", "adams"]), default="huron", show_default=True)
@click.option("--epsilon", default=0.0, show_default=True)
@click.option("--variant", type=click.Choice(["thirds", "endpoints"]), default="thirds", show_default=True)
@click.option("--n", default=contour_mod.DEFAULT_N, show_default=True)
@click.option("--json", "--out", "out", type=click.Path(), default=None, help="Output JSON path (default stdout).")
def typology(in_path, typology_name, epsilon, variant, n, out):
    """Classify phrases into discrete contour types and report the counts."""
    items = _typology_items(in_path, typology_name, n)
    dist = type_distribution(items, typology=typology_name, epsilon=epsilon, variant=variant)
    _dump(dist.to_obj(), out)


def _parse_grid(grid: str) -> np.ndarray:
    try:
        lo, hi, step = (float(part) for part in grid.split(":"))
    except ValueError:
        _fail(f"bad --grid {grid!r}; expected MIN:MAX:STEP")
    if step <= 0 or hi < lo:
        _fail(f"bad --grid {grid!r}; expected MIN:MAX:STEP with STEP > 0")
    return np.round(np.arange(lo, hi + step / 2, step), 10)


@main.command(name="epsilon-sweep")
@click.option("--in", "in_path", type=click.Path(exists=True), required=True)
@click.option("--typology", "typology_name", type=click.Choice(["huron", "adams"]), default="huron", show_default=True)
@click.option("--grid", default="0:4:0.1", show_default=True, help="Tolerance grid MIN:MAX:STEP.")
@click.option("--variant", type=click.Choice(["thirds", "endpoints"]), default="thirds", show_default=True)
@click.option("--n", default=contour_mod.DEFAULT_N, show_default=True)
@click.option("--json", "--out", "out", type=click.Path(), default=None, help="Output JSON path (default stdout).")
def epsilon_sweep(in_path, typology_name, grid, variant, n, out):
    """Type-distribution entropy across a tolerance grid."""
    items = _typology_items(in_path, typology_name, n)
    sweep = max_entropy_epsilon(
        items, typology=typology_name, epsilons=_parse_grid(grid), variant=variant
    )
    _dump(sweep.to_obj(), out)


@main.command(name="kmeans")
@click.option("--in", "in_path", type=click.Path(exists=True), required=True)
@click.option("--k", required=True, type=int)
@click.option("--seed", default=0, show_default=True)
@click.option("--restarts", default=10, show_default=True)
@click.option("--repr", "--representation", "representation", default="cosine", show_default=True)
@click.option("--n", default=contour_mod.DEFAULT_N, show_default=True)
@click.option("--json", "--out", "out", type=click.Path(), default=None, help="Output JSON path (default stdout).")
def kmeans_cmd(in_path, k, seed, restarts, representation, n, out):
    """Open typology: k-means cluster labels over contour vectors."""
    vectors = _as_contours(in_path, representation, n, None)
    matrix = contour_mod.contour_matrix(vectors)
    try:
        result = kmeans(matrix, k, seed=seed, restarts=restarts)
    except ValueError as exc:
        _fail(str(exc))
    obj = {
        "k": result.k,
        "seed": result.seed,
        "inertia": float(result.inertia),
        "centroids": [[float(x) for x in row] for row in result.centroids],
        "labels": {vec.id: int(lab) for vec, lab in zip(vectors, result.labels)},
    }
    _dump(obj, out)


@main.command()
@click.option("--in", "in_path", type=click.Path(exists=True), required=True)
@click.option("--by", type=click.Choice(["none", "source", "huron"]), default="none", show_default=True)
@click.option("--epsilon", default=0.0, show_default=True, help="Tolerance for --by huron.")
@click.option("--repr", "--representation", "representation", default="centered", show_default=True)
@click.option("--n", default=contour_mod.DEFAULT_N, show_default=True)
@click.option("--out", "--json", "out", type=click.Path(), default=None, help="Output JSON path (default stdout).")
def average(in_path, by, epsilon, representation, n, out):
    """Average contours (with 95% bands), optionally grouped."""
    vectors = _as_contours(in_path, representation, n, None)
    groups: dict[str, list] = {}
    if by == "none":
        groups["all"] = vectors
    elif by == "source":
        for v in vectors:
            groups.setdefault(v.source or "<unknown>", []).append(v)
    else:
        for v in vectors:
            groups.setdefault(huron_type(v, epsilon=epsilon), []).append(v)
    payload = {
        "groups": [
            {"label": label, "average": average_contour(members).to_obj()}
            for label, members in sorted(groups.items())
        ]
    }
    _dump(payload, out)


# --- experiments and figures ------------------------------------------------


@main.command()
@click.option("--config", "config_path", type=click.Path(exists=True), required=True)
@click.option("--out", type=click.Path(), required=True, help="Output report JSON.")
@click.option("--quiet", is_flag=True, default=False)
def run(config_path, out, quiet):
    """Run a full experiment grid and write the report.

    Exit code 1 means the config was rejected; 2 means the run finished but
    at least one cell errored (the report records which).
    """
    try:
        config = load_config(config_path)
    except ConfigError as exc:
        _fail(str(exc))
    progress = None if quiet else lambda line: click.echo(line, err=True)
    try:
        report = run_experiment(config, progress=progress)
    except ConfigError as exc:
        _fail(str(exc))
    write_report(out, report)
    errors = [c for c in report.cells if c.get("status") == "error"]
    click.echo(f"wrote report with {len(report.cells)} cells to {out}", err=True)
    if errors:
        click.echo(f"{len(errors)} cells errored", err=True)
        sys.exit(2)


@main.command()
@click.option("--report", "--in", "in_path", type=click.Path(exists=True), required=True, help="Report (grid/panel) or sweep/average JSON.")
@click.option(
    "--kind",
    type=click.Choice(["grid", "panel", "epsilon", "average"]),
    default="grid",
    show_default=True,
)
@click.option("--dataset", default=None, help="Cell selector (panel).")
@click.option("--repr", "--representation", "representation", default=None, help="Cell selector (panel).")
@click.option("--metric", default=None, help="Cell selector (panel).")
@click.option("--variant", default="full", show_default=True, help="Cell selector (panel).")
@click.option("--out", type=click.Path(), required=True, help="Output SVG file or directory.")
def render(in_path, kind, dataset, representation, metric, variant, out):
    """Render deterministic SVG figures from stored JSON results."""
    if kind in ("grid", "panel"):
        report = read_report(in_path)
        if kind == "grid":
            svg = render_grid(report)
        else:
            match = {"variant": variant}
            for key, value in (
                ("dataset", dataset),
                ("representation", representation),
                ("metric", metric),
            ):
                if value is not None:
                    match[key] = value
            try:
                cell = report.cell(**match)
            except KeyError as exc:
                _fail(str(exc))
            svg = render_panel(cell)
    else:
        with open(in_path, encoding="utf8") as fh:
            obj = json.load(fh)
        if kind == "epsilon":
            svg = render_epsilon(obj)
        else:
            svg = render_average(obj["groups"])
    out_path = Path(out)
    if out_path.is_dir() or str(out).endswith(("/", "\\")):
        out_path.mkdir(parents=True, exist_ok=True)
        out_path = out_path / f"{kind}.svg"
    with open(out_path, "w", encoding="utf8") as fh:
        fh.write(svg)
    click.echo(f"wrote {out_path}", err=True)


if __name__ == "__main__":
    main()
