"""Experiment pipeline: config loading, the cell grid, and JSON reports.

An experiment is a cross product of datasets x representations x metrics
(x variants); each resulting cell samples pairwise distances, runs the
multimodality test, and records the distance histogram and KDE curve so that
figures can be rendered from the report alone. Cells are seeded individually
from (experiment seed, cell index), so results do not depend on execution
order, and any cell failure is recorded in place without aborting the rest.

Reports serialize with sorted keys and indent 2; the only volatile field is
``created_at``, so two runs of the same config differ in at most that line.
"""

from __future__ import annotations

import json
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from datetime import datetime, timezone

import numpy as np

from .contour import DEFAULT_N, REPRESENTATIONS, phrase_to_contour
from .embed import UmapModel
from .ingest import (
    aggregate_sample,
    derive_rng,
    derive_seed,
    extract_phrases,
    load_kern_dir,
    read_melodies,
    read_phrases_or_melodies,
    segment_corpus,
)
from .metrics import METRICS, pairwise_sample
from .stats import dip_test, kde
from .synth import MarkovContourModel, make_clustered

__all__ = ["VERSION", "ConfigError", "ExperimentConfig", "Report", "load_config", "run_experiment", "write_report", "read_report"]

VERSION = "0.1.0"

VARIANTS = ("full", "unique_only", "dim10", "per_length", "per_dataset")

_DATASET_KINDS = (
    "kern_dir",
    "jsonl",
    "segments",
    "synthetic-uniform",
    "synthetic-clustered",
    "aggregate",
)


class ConfigError(ValueError):
    """Raised for malformed or inconsistent experiment configs."""


@dataclass
class ExperimentConfig:
    seed: int
    datasets: dict
    representations: list[str]
    metrics: list[str]
    variants: list[str] = field(default_factory=lambda: ["full"])
    m: int = 30000
    replicates: int = 2000
    n: int = DEFAULT_N
    per_length_min: int = 50
    umap_params: dict = field(default_factory=dict)
    raw: dict = field(default_factory=dict)


def load_config(path) -> ExperimentConfig:
    try:
        with open(path, encoding="utf8") as fh:
            raw = json.load(fh)
    except (OSError, json.JSONDecodeError) as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    return parse_config(raw)


def parse_config(raw: dict) -> ExperimentConfig:
    if not isinstance(raw, dict):
        raise ConfigError("config must be a JSON object")
    for key in ("datasets", "representations", "metrics"):
        if key not in raw:
            raise ConfigError(f"config is missing {key!r}")
    datasets = raw["datasets"]
    if not isinstance(datasets, dict) or not datasets:
        raise ConfigError("datasets must be a non-empty object")
    for name, spec in datasets.items():
        if not isinstance(spec, dict) or "kind" not in spec:
            raise ConfigError(f"dataset {name!r} needs a 'kind'")
        if spec["kind"] not in _DATASET_KINDS:
            raise ConfigError(f"dataset {name!r} has unknown kind {spec['kind']!r}")
    representations = list(raw["representations"])
    for rep in representations:
        if rep not in REPRESENTATIONS:
            raise ConfigError(f"unknown representation {rep!r}")
    metrics = list(raw["metrics"])
    for metric in metrics:
        if metric not in METRICS:
            raise ConfigError(f"unknown metric {metric!r}")
    variants = list(raw.get("variants", ["full"]))
    for variant in variants:
        if variant not in VARIANTS:
            raise ConfigError(f"unknown variant {variant!r}")
    config = ExperimentConfig(
        seed=int(raw.get("seed", 0)),
        datasets=datasets,
        representations=representations,
        metrics=metrics,
        variants=variants,
        m=int(raw.get("m", 30000)),
        replicates=int(raw.get("replicates", 2000)),
        n=int(raw.get("n", DEFAULT_N)),
        per_length_min=int(raw.get("per_length_min", 50)),
        umap_params=dict(raw.get("umap", {})),
        raw=raw,
    )
    if config.m < 1 or config.replicates < 1 or config.n < 2:
        raise ConfigError("m, replicates and n must be positive (n >= 2)")
    return config


# --- dataset resolution -----------------------------------------------------


def _resolve_datasets(config: ExperimentConfig, warnings: list[str]) -> dict:
    """Materialize every dataset as a phrase list, in declaration order.

    Synthetic and aggregate datasets may only reference datasets declared
    before them.
    """
    resolved: dict[str, list] = {}
    for name, spec in config.datasets.items():
        kind = spec["kind"]
        if kind == "kern_dir":
            melodies = load_kern_dir(spec["path"], source=spec.get("source", name))
            phrases = [ph for mel in melodies for ph in extract_phrases(mel)]
        elif kind == "jsonl":
            phrases = read_phrases_or_melodies(spec["path"])
        elif kind == "segments":
            melodies = read_melodies(spec["path"])
            phrases = segment_corpus(
                melodies, float(spec.get("lam", 10.0)), derive_seed(config.seed, "segments", name)
            )
        elif kind in ("synthetic-uniform", "synthetic-clustered"):
            base = spec.get("base")
            if base not in resolved:
                raise ConfigError(f"dataset {name!r}: base {base!r} is not declared earlier")
            model = MarkovContourModel().fit(resolved[base])
            if kind == "synthetic-uniform":
                count = int(spec.get("count", 1000))
                phrases = model.sample(
                    count, rng=derive_rng(config.seed, "synth", name), source=name
                )
            else:
                pool = int(spec.get("pool", 25000))
                keep = int(spec.get("count", 1000))
                k = int(spec.get("k", 5))
                pool_phrases = model.sample(
                    pool, rng=derive_rng(config.seed, "synth", name), source=name
                )
                phrases, _ = make_clustered(
                    pool_phrases,
                    k=k,
                    pool=pool,
                    keep=keep,
                    rng=derive_seed(config.seed, "cluster", name),
                )
        elif kind == "aggregate":
            parts = spec.get("of", [])
            missing = [p for p in parts if p not in resolved]
            if missing or not parts:
                raise ConfigError(f"dataset {name!r}: aggregate of undeclared {missing!r}")
            phrases, clamped = aggregate_sample(
                [resolved[p] for p in parts],
                int(spec.get("per_dataset", 1000)),
                derive_rng(config.seed, "aggregate", name),
            )
            for src in clamped:
                warnings.append(f"aggregate {name!r}: {src!r} smaller than per_dataset")
        else:  # pragma: no cover - guarded by parse_config
            raise ConfigError(f"unknown dataset kind {kind!r}")
        if not phrases:
            raise ConfigError(f"dataset {name!r} resolved to zero phrases")
        resolved[name] = phrases
    return resolved


# --- cells ------------------------------------------------------------------


def _contour_length(config: ExperimentConfig, variant: str) -> tuple[int, int | None]:
    """(step samples n, cosine coefficient count) for a variant."""
    if variant == "dim10":
        return config.n, 10
    return config.n, None


def _cell_vectors(phrases, representation: str, config: ExperimentConfig, variant: str):
    n, n_coef = _contour_length(config, variant)
    contours = [
        phrase_to_contour(ph, representation, n=n, n_coef=n_coef) for ph in phrases
    ]
    if variant == "dim10" and representation != "cosine":
        for c in contours:
            c.values = np.ascontiguousarray(c.values[::5])
    return contours


def _dedupe(contours):
    seen = set()
    unique = []
    for c in contours:
        key = np.asarray(c.values, dtype=float).tobytes()
        if key not in seen:
            seen.add(key)
            unique.append(c)
    return unique


def _summaries(values: np.ndarray) -> dict:
    hist_counts, hist_edges = np.histogram(values, bins=32)
    curve = kde(values)
    return {
        "mean": float(values.mean()),
        "sd": float(values.std(ddof=1)) if values.size > 1 else 0.0,
        "min": float(values.min()),
        "max": float(values.max()),
        "histogram": {
            "counts": [int(c) for c in hist_counts],
            "edges": [float(e) for e in hist_edges],
        },
        "kde": {
            "grid": [float(g) for g in curve.grid],
            "density": [float(d) for d in curve.density],
            "bandwidth": float(curve.bandwidth),
            "degenerate": bool(curve.degenerate),
        },
    }


def _run_cell(cell: dict, contours, config: ExperimentConfig, cell_seed: int) -> dict:
    out = dict(cell)
    out["n_contours"] = len(contours)
    try:
        if len(contours) < 2:
            raise ValueError("fewer than 2 contours in cell")
        embedding = None
        if cell["metric"] == "umap":
            params = dict(config.umap_params)
            params.setdefault("seed", derive_seed(cell_seed, "umap"))
            from .contour import contour_matrix

            model = UmapModel(**params)
            embedding = model.fit(contour_matrix(contours)).embedding_
        sample = pairwise_sample(
            contours,
            cell["metric"],
            m=config.m,
            rng=derive_seed(cell_seed, "pairs"),
            embedding=embedding,
            dataset=cell["dataset"],
        )
        dip_res = dip_test(
            sample.values, replicates=config.replicates, rng=derive_seed(cell_seed, "null")
        )
        out.update(
            {
                "status": "ok",
                "error": None,
                "dip": float(dip_res.dip),
                "p_value": float(dip_res.p_value),
                "n_pairs": int(dip_res.n),
                "replicates": int(dip_res.replicates),
                "seed": int(cell_seed),
            }
        )
        out.update(_summaries(sample.values))
    except Exception as exc:
        out.update({"status": "error", "error": f"{type(exc).__name__}: {exc}"})
    return out


@dataclass
class Report:
    version: str
    seed: int
    config: dict
    warnings: list[str]
    cells: list[dict]
    created_at: str

    def to_obj(self) -> dict:
        return {
            "version": self.version,
            "seed": int(self.seed),
            "config": self.config,
            "warnings": list(self.warnings),
            "cells": self.cells,
            "created_at": self.created_at,
        }

    def cell(self, **match) -> dict:
        """The unique cell whose fields equal all the given values."""
        hits = [
            c for c in self.cells if all(c.get(k) == v for k, v in match.items())
        ]
        if len(hits) != 1:
            raise KeyError(f"{len(hits)} cells match {match!r}")
        return hits[0]


def run_experiment(config: ExperimentConfig, progress=None) -> Report:
    """Run every cell of the experiment grid and assemble the report.

    ``progress``, if given, is called with a one-line string per finished
    cell. The CONTOURLAB_THREADS environment variable (default 1) caps the
    number of worker threads; results are identical for any worker count.
    """
    warnings: list[str] = []
    datasets = _resolve_datasets(config, warnings)

    tasks = []  # (cell dict, contours, cell_seed)
    cell_index = 0
    for ds_name, phrases in datasets.items():
        for representation in config.representations:
            for metric in config.metrics:
                for variant in config.variants:
                    base = {
                        "dataset": ds_name,
                        "representation": representation,
                        "metric": metric,
                        "variant": variant,
                        "stratum": None,
                    }
                    this_index = cell_index
                    cell_index += 1
                    if metric == "dtw" and representation == "cosine":
                        skipped = dict(base)
                        skipped.update(
                            {"status": "skipped", "error": None, "reason": "dtw-cosine"}
                        )
                        tasks.append((skipped, None, None))
                        continue
                    if variant == "per_length":
                        strata = sorted({ph.length for ph in phrases})
                        for stratum in strata:
                            sub = [ph for ph in phrases if ph.length == stratum]
                            cell = dict(base)
                            cell["stratum"] = int(stratum)
                            if len(sub) < config.per_length_min:
                                cell.update(
                                    {
                                        "status": "skipped",
                                        "error": None,
                                        "reason": "stratum-too-small",
                                        "n_contours": len(sub),
                                    }
                                )
                                tasks.append((cell, None, None))
                                continue
                            seed = derive_seed(config.seed, "cell", this_index, stratum)
                            tasks.append(
                                (cell, _cell_vectors(sub, representation, config, variant), seed)
                            )
                    elif variant == "per_dataset":
                        sources = sorted({ph.source for ph in phrases})
                        for source in sources:
                            sub = [ph for ph in phrases if ph.source == source]
                            cell = dict(base)
                            cell["stratum"] = source
                            seed = derive_seed(config.seed, "cell", this_index, source)
                            tasks.append(
                                (cell, _cell_vectors(sub, representation, config, variant), seed)
                            )
                    else:
                        contours = _cell_vectors(phrases, representation, config, variant)
                        if variant == "unique_only":
                            contours = _dedupe(contours)
                        seed = derive_seed(config.seed, "cell", this_index)
                        tasks.append((base, contours, seed))

    def work(task):
        cell, contours, seed = task
        if contours is None:
            return cell
        return _run_cell(cell, contours, config, seed)

    workers = max(1, int(os.environ.get("CONTOURLAB_THREADS", "1") or "1"))
    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            cells = list(pool.map(work, tasks))
    else:
        cells = [work(t) for t in tasks]
    if progress is not None:
        for c in cells:
            progress(_describe_cell(c))

    return Report(
        version=VERSION,
        seed=config.seed,
        config=config.raw,
        warnings=warnings,
        cells=cells,
        created_at=datetime.now(timezone.utc).isoformat(),
    )


def _describe_cell(cell: dict) -> str:
    key = "/".join(
        str(cell.get(f)) for f in ("dataset", "representation", "metric", "variant")
    )
    if cell.get("stratum") is not None:
        key += f"[{cell['stratum']}]"
    status = cell.get("status")
    if status == "ok":
        return f"{key}: dip={cell['dip']:.5f} p={cell['p_value']:.4f}"
    if status == "skipped":
        return f"{key}: skipped ({cell.get('reason')})"
    return f"{key}: ERROR {cell.get('error')}"


def write_report(path, report: Report) -> None:
    with open(path, "w", encoding="utf8") as fh:
        json.dump(report.to_obj(), fh, sort_keys=True, indent=2)
        fh.write("\n")


def read_report(path) -> Report:
    with open(path, encoding="utf8") as fh:
        obj = json.load(fh)
    return Report(
        version=obj["version"],
        seed=obj["seed"],
        config=obj["config"],
        warnings=obj["warnings"],
        cells=obj["cells"],
        created_at=obj["created_at"],
    )
