"""Deterministic SVG figures rendered straight from report JSON.

No plotting library is used: every figure is assembled from SVG primitives
with fixed-precision coordinates, so rendering the same report twice yields
byte-identical files. Histograms and KDE curves are taken from the report
itself (cells carry them), never recomputed, which keeps figures a pure
function of the report.

Panels for cells whose dip test does not reject unimodality (p >= 0.05) get
a grey background; significant cells stay white.
"""

from __future__ import annotations

from xml.sax.saxutils import escape

__all__ = ["render_grid", "render_panel", "render_epsilon", "render_average"]

_GREY = "#d9d9d9"
_WHITE = "#ffffff"
_BAR = "#6688bb"
_CURVE = "#cc3333"
_FRAME = "#333333"
_ALPHA = 0.05


def _fmt(x: float) -> str:
    return f"{float(x):.3f}"


def _rect(x, y, w, h, fill, stroke=None) -> str:
    s = f'<rect x="{_fmt(x)}" y="{_fmt(y)}" width="{_fmt(w)}" height="{_fmt(h)}" fill="{fill}"'
    if stroke:
        s += f' stroke="{stroke}"'
    return s + "/>"


def _polyline(points, stroke, width=1.0, fill="none") -> str:
    pts = " ".join(f"{_fmt(x)},{_fmt(y)}" for x, y in points)
    return f'<polyline points="{pts}" fill="{fill}" stroke="{stroke}" stroke-width="{_fmt(width)}"/>'


def _polygon(points, fill, opacity=None) -> str:
    pts = " ".join(f"{_fmt(x)},{_fmt(y)}" for x, y in points)
    s = f'<polygon points="{pts}" fill="{fill}" stroke="none"'
    if opacity is not None:
        s += f' fill-opacity="{_fmt(opacity)}"'
    return s + "/>"


def _line(x1, y1, x2, y2, stroke, width=1.0) -> str:
    return (
        f'<line x1="{_fmt(x1)}" y1="{_fmt(y1)}" x2="{_fmt(x2)}" y2="{_fmt(y2)}" '
        f'stroke="{stroke}" stroke-width="{_fmt(width)}"/>'
    )


def _text(x, y, content, size=10, anchor="start", fill="#000000") -> str:
    return (
        f'<text x="{_fmt(x)}" y="{_fmt(y)}" font-family="monospace" font-size="{size}" '
        f'text-anchor="{anchor}" fill="{fill}">{escape(str(content))}</text>'
    )


def _svg(width: float, height: float, parts: list[str]) -> str:
    head = (
        '<svg xmlns="http://www.w3.org/2000/svg" '
        f'width="{_fmt(width)}" height="{_fmt(height)}" '
        f'viewBox="0 0 {_fmt(width)} {_fmt(height)}">'
    )
    return head + "\n" + "\n".join(parts) + "\n</svg>\n"


def _cells_of(report):
    return report.cells if hasattr(report, "cells") else report["cells"]


def _hatch(x0: float, y0: float, w: float, h: float) -> list[str]:
    """A framed box filled with diagonal hatching, for absent cells."""
    parts = [_rect(x0, y0, w, h, _WHITE, stroke=_FRAME)]
    step = 8.0
    t = step
    while t < w + h:
        x1 = x0 + max(0.0, t - h)
        y1 = y0 + min(t, h)
        x2 = x0 + min(t, w)
        y2 = y0 + max(0.0, t - w)
        parts.append(_line(x1, y1, x2, y2, "#bbbbbb", 0.8))
        t += step
    return parts


def _draw_distribution(cell: dict, x0: float, y0: float, w: float, h: float) -> list[str]:
    """Histogram bars plus KDE overlay inside the given box."""
    parts = []
    status = cell.get("status")
    p = cell.get("p_value")
    background = _WHITE if (status == "ok" and p is not None and p < _ALPHA) else _GREY
    if status != "ok":
        background = _WHITE
    parts.append(_rect(x0, y0, w, h, background, stroke=_FRAME))
    if status == "skipped":
        parts.append(_text(x0 + w / 2, y0 + h / 2, f"skipped: {cell.get('reason')}", 9, "middle", "#888888"))
        return parts
    if status == "error":
        parts.append(_text(x0 + w / 2, y0 + h / 2, "error", 9, "middle", "#bb2222"))
        return parts

    hist = cell["histogram"]
    counts = hist["counts"]
    edges = hist["edges"]
    curve = cell["kde"]
    grid = curve["grid"]
    density = curve["density"]

    xmin = min(edges[0], grid[0])
    xmax = max(edges[-1], grid[-1])
    span = xmax - xmin or 1.0
    inner_x, inner_y = x0 + 2, y0 + 4
    inner_w, inner_h = w - 4, h - 18

    def to_x(v):
        return inner_x + (v - xmin) / span * inner_w

    max_count = max(counts) or 1
    for i, c in enumerate(counts):
        if c <= 0:
            continue
        bx = to_x(edges[i])
        bw = to_x(edges[i + 1]) - bx
        bh = c / max_count * inner_h
        parts.append(_rect(bx, inner_y + inner_h - bh, bw, bh, _BAR))

    max_density = max(density) or 1.0
    points = [
        (to_x(g), inner_y + inner_h - d / max_density * inner_h)
        for g, d in zip(grid, density)
    ]
    parts.append(_polyline(points, _CURVE, 1.0))
    parts.append(
        _text(
            x0 + w / 2,
            y0 + h - 4,
            f"dip={cell['dip']:.4f} p={cell['p_value']:.3f}",
            8,
            "middle",
        )
    )
    return parts


def _row_label(cell: dict) -> str:
    label = f"{cell['dataset']} | {cell['representation']}"
    if cell.get("variant") and cell["variant"] != "full":
        label += f" | {cell['variant']}"
    if cell.get("stratum") is not None:
        label += f" [{cell['stratum']}]"
    return label


def render_grid(report) -> str:
    """One panel per cell, rows keyed by dataset/representation/variant,
    columns by metric."""
    cells = _cells_of(report)
    metrics = []
    rows = []
    panels = {}
    for cell in cells:
        metric = cell["metric"]
        if metric not in metrics:
            metrics.append(metric)
        row_key = (cell["dataset"], cell["representation"], cell["variant"], cell.get("stratum"))
        if row_key not in rows:
            rows.append(row_key)
        panels[(row_key, metric)] = cell

    label_w, header_h = 240.0, 26.0
    panel_w, panel_h = 200.0, 130.0
    width = label_w + panel_w * len(metrics) + 10
    height = header_h + panel_h * len(rows) + 10

    parts = [_rect(0, 0, width, height, _WHITE)]
    for j, metric in enumerate(metrics):
        parts.append(
            _text(label_w + j * panel_w + panel_w / 2, header_h - 8, metric, 12, "middle")
        )
    for i, row_key in enumerate(rows):
        y0 = header_h + i * panel_h
        sample = next(c for c in cells if (c["dataset"], c["representation"], c["variant"], c.get("stratum")) == row_key)
        parts.append(_text(6, y0 + panel_h / 2, _row_label(sample), 10))
        for j, metric in enumerate(metrics):
            cell = panels.get((row_key, metric))
            box = (label_w + j * panel_w + 4, y0 + 4, panel_w - 8, panel_h - 8)
            if cell is None:
                parts.extend(_hatch(*box))
            else:
                parts.extend(_draw_distribution(cell, *box))
    return _svg(width, height, parts)


def render_panel(cell: dict) -> str:
    """A single enlarged distribution panel with axis annotations."""
    width, height = 460.0, 330.0
    parts = [_rect(0, 0, width, height, _WHITE)]
    parts.append(_text(width / 2, 16, _row_label(cell) + f" | {cell['metric']}", 12, "middle"))
    parts.extend(_draw_distribution(cell, 40, 28, width - 60, height - 80))
    if cell.get("status") == "ok":
        edges = cell["histogram"]["edges"]
        parts.append(_text(42, height - 36, _fmt(edges[0]), 9))
        parts.append(_text(width - 22, height - 36, _fmt(edges[-1]), 9, "end"))
        parts.append(
            _text(
                width / 2,
                height - 16,
                f"n_pairs={cell['n_pairs']} replicates={cell['replicates']} "
                f"mean={cell['mean']:.3f} sd={cell['sd']:.3f}",
                9,
                "middle",
            )
        )
    return _svg(width, height, parts)


def render_epsilon(sweep) -> str:
    """Entropy against tolerance, with the maximizing tolerance marked."""
    obj = sweep.to_obj() if hasattr(sweep, "to_obj") else dict(sweep)
    epsilons = [float(e) for e in obj["epsilons"]]
    entropies = [float(h) for h in obj["entropies"]]
    best = float(obj["best_epsilon"])
    width, height = 520.0, 300.0
    x0, y0, plot_w, plot_h = 50.0, 30.0, width - 80, height - 90
    parts = [_rect(0, 0, width, height, _WHITE)]
    parts.append(_rect(x0, y0, plot_w, plot_h, _WHITE, stroke=_FRAME))
    emin, emax = min(epsilons), max(epsilons)
    espan = (emax - emin) or 1.0
    hmax = max(entropies) or 1.0
    bar_w = plot_w / max(len(epsilons), 1) * 0.8
    for e, h in zip(epsilons, entropies):
        bx = x0 + (e - emin) / espan * (plot_w - bar_w)
        bh = h / hmax * (plot_h - 10)
        parts.append(_rect(bx, y0 + plot_h - bh, bar_w, bh, _BAR))
    best_x = x0 + (best - emin) / espan * (plot_w - bar_w) + bar_w / 2
    parts.append(_line(best_x, y0, best_x, y0 + plot_h, _CURVE, 1.5))
    parts.append(_text(best_x, y0 - 6, f"max entropy at eps={best:.1f}", 10, "middle", _CURVE))
    parts.append(_text(x0, height - 28, _fmt(emin), 9))
    parts.append(_text(x0 + plot_w, height - 28, _fmt(emax), 9, "end"))
    parts.append(_text(width / 2, height - 10, f"typology: {obj['typology']}", 10, "middle"))
    parts.append(_text(x0 - 4, y0 + 8, _fmt(hmax), 9, "end"))
    return _svg(width, height, parts)


def render_average(groups) -> str:
    """Average contours with 95% bands, one panel per group.

    ``groups`` is a list of {"label": ..., "average": {mean, lower, upper, n}}.
    """
    groups = list(groups)
    per_row = 3
    panel_w, panel_h = 230.0, 170.0
    n_rows = (len(groups) + per_row - 1) // per_row or 1
    width = per_row * panel_w + 20
    height = n_rows * panel_h + 20
    parts = [_rect(0, 0, width, height, _WHITE)]
    for g_idx, group in enumerate(groups):
        avg = group["average"]
        mean = [float(v) for v in avg["mean"]]
        lower = [float(v) for v in avg["lower"]]
        upper = [float(v) for v in avg["upper"]]
        row, col = divmod(g_idx, per_row)
        x0 = 10 + col * panel_w
        y0 = 10 + row * panel_h
        inner_x, inner_y = x0 + 8, y0 + 22
        inner_w, inner_h = panel_w - 24, panel_h - 46
        parts.append(_rect(x0 + 4, y0 + 4, panel_w - 12, panel_h - 12, _WHITE, stroke=_FRAME))
        label = group.get("label", f"group {g_idx}")
        parts.append(_text(x0 + panel_w / 2, y0 + 16, f"{label} (n={avg.get('n', '?')})", 10, "middle"))
        vmin = min(lower)
        vmax = max(upper)
        vspan = (vmax - vmin) or 1.0
        m = len(mean)

        def to_xy(i, v):
            x = inner_x + (i / max(m - 1, 1)) * inner_w
            y = inner_y + inner_h - (v - vmin) / vspan * inner_h
            return (x, y)

        band = [to_xy(i, upper[i]) for i in range(m)] + [
            to_xy(i, lower[i]) for i in range(m - 1, -1, -1)
        ]
        parts.append(_polygon(band, _BAR, opacity=0.35))
        parts.append(_polyline([to_xy(i, mean[i]) for i in range(m)], _CURVE, 1.5))
        parts.append(_text(inner_x, y0 + panel_h - 10, _fmt(vmin), 8))
        parts.append(_text(inner_x, inner_y - 2, _fmt(vmax), 8))
    return _svg(width, height, parts)
