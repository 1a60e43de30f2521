"""Tidy per-panel CSVs (and bare-bones SVG) from finished runs."""
from __future__ import annotations

from collections import Counter, defaultdict
from html import escape
from pathlib import Path
from typing import Sequence

import numpy as np

from reponlab.harness.config import Experiment
from reponlab.harness.runner import PRIMARY_OUTPUT, RunManifest, read_csv, write_csv, write_manifest

FIGURES = {
    "critical-fraction-theory": Experiment.STATICS_CURVE,
    "critical-fraction-exp": Experiment.FRACTION_SWEEP,
    "fig-repon-ps": Experiment.REPON_PHASE_SPACE,
    "repon-pd": Experiment.LR_PHASE_DIAGRAM,
    "repon-prob": Experiment.REPON_PROBABILITY,
    "repon-pd-wd": Experiment.WD_PHASE_DIAGRAM,
    "goldilocks": Experiment.GOLDILOCKS,
}

# column schema of each figure's panel CSVs
FIGURE_COLUMNS = {
    "critical-fraction-theory": ("relation", "series", "fraction", "accuracy", "stderr"),
    "critical-fraction-exp": ("relation", "fraction", "mean_accuracy", "std_accuracy", "reference_fraction"),
    "fig-repon-ps": ("a2_0", "c_0", "C", "label"),
    "repon-pd": ("relation", "eta_enc", "eta_dec", "phase", "generalizing_fraction", "replicates"),
    "repon-prob": ("ratio", "p_closed", "p_mc", "stderr", "sigma_a", "sigma_c"),
    "repon-pd-wd": ("relation", "wd", "eta_dec", "phase", "generalizing_fraction", "replicates"),
    "goldilocks": ("relation", "depth", "mean_test_accuracy", "std_test_accuracy", "repeats"),
}

PHASE_COLORS = {
    "generalization": "#4caf50",
    "grokking": "#fdd835",
    "memorization": "#7b1fa2",
    "confusion": "#9e9e9e",
    "collision": "#4caf50",
    "no_collision": "#e53935",
    "boundary": "#212121",
}
SERIES_COLORS = ("#1f77b4", "#ff7f0e", "#2ca02c", "#d62728", "#9467bd", "#8c564b")


class FigureError(ValueError):
    pass


def _panel_name(figure_id: str, manifest: RunManifest, index: int, panels: int) -> str:
    if panels == 1:
        return figure_id
    label = manifest.relation or f"panel{index}"
    return f"{figure_id}_{label}"


def _rows(manifest: RunManifest, name: str) -> list[dict]:
    return read_csv(manifest.path(name))


def _phase_cells(rows, x_key):
    cells = defaultdict(list)
    for r in rows:
        cells[(float(r[x_key]), float(r["eta_dec"]))].append(r["phase"])
    out = []
    for (x, y), phases in sorted(cells.items()):
        counts = Counter(phases)
        majority = max(phases, key=lambda p: (counts[p], -phases.index(p)))
        gen = sum(p in ("generalization", "grokking") for p in phases) / len(phases)
        out.append((x, y, majority, gen, len(phases)))
    return out


def _panel(figure_id: str, manifest: RunManifest) -> tuple[list[tuple], dict]:
    """Rows for the panel CSV plus what the SVG renderer needs."""
    rel = manifest.relation
    if figure_id == "critical-fraction-theory":
        rows = [(rel, "mc", float(r["fraction"]), float(r["accuracy"]), float(r["stderr"])) for r in _rows(manifest, "oracle.csv")]
        rows += [(rel, "analytic", float(r["fraction"]), float(r["upper_bound"]), 0.0) for r in _rows(manifest, "analytic.csv")]
        series = defaultdict(lambda: ([], []))
        for _, s, f, a, _ in rows:
            series[s][0].append(f)
            series[s][1].append(a)
        return rows, {"kind": "lines", "series": dict(series), "x": "training fraction", "y": "accuracy"}
    if figure_id == "critical-fraction-exp":
        raw = _rows(manifest, "fraction_curve.csv")
        rows = [
            (rel, float(r["fraction"]), float(r["mean_accuracy"]), float(r["std_accuracy"]), float(r["reference_fraction"]))
            for r in raw
        ]
        xs = [r[1] for r in rows]
        return rows, {
            "kind": "lines", "series": {"experiment": (xs, [r[2] for r in rows])},
            "vline": rows[0][4] if rows else None, "x": "training fraction", "y": "accuracy",
        }
    if figure_id == "fig-repon-ps":
        rows = [(float(r["a2_0"]), float(r["c_0"]), float(r["C"]), r["label"]) for r in _rows(manifest, "phase_space.csv")]
        return rows, {"kind": "heatmap", "cells": [(a, c, lab) for a, c, _, lab in rows], "x": "a2", "y": "c", "log": False}
    if figure_id in ("repon-pd", "repon-pd-wd"):
        x_key = "eta_enc" if figure_id == "repon-pd" else "wd"
        cells = _phase_cells(_rows(manifest, "phase_grid.csv"), x_key)
        rows = [(rel,) + c for c in cells]
        return rows, {
            "kind": "heatmap", "cells": [(x, y, ph) for x, y, ph, _, _ in cells],
            "x": x_key, "y": "eta_dec", "log": True,
        }
    if figure_id == "repon-prob":
        raw = _rows(manifest, "probability.csv")
        rows = [tuple(float(r[k]) for k in FIGURE_COLUMNS[figure_id]) for r in raw]
        xs = [r[0] for r in rows]
        return rows, {
            "kind": "lines", "series": {"closed form": (xs, [r[1] for r in rows]), "monte carlo": (xs, [r[2] for r in rows])},
            "x": "eta_x / eta_A", "y": "collision probability", "xlog": True,
        }
    raw = _rows(manifest, "goldilocks.csv")
    rows = [(rel, int(r["depth"]), float(r["mean_test_accuracy"]), float(r["std_test_accuracy"]), int(r["repeats"])) for r in raw]
    return rows, {"kind": "lines", "series": {"test accuracy": ([r[1] for r in rows], [r[2] for r in rows])}, "x": "depth", "y": "test accuracy"}


def emit_figure_data(manifests, figure_id: str, out_dir, svg: bool = True) -> RunManifest:
    """Write one tidy CSV (and optionally one SVG) per panel of ``figure_id``.

    ``manifests`` is one run or a sequence of runs, one per panel (for
    example one lr phase diagram per relation). Column schemas are listed in
    ``FIGURE_COLUMNS``. Returns the manifest of ``out_dir``.
    """
    if figure_id not in FIGURES:
        raise FigureError(f"unknown figure id {figure_id!r}; choose from {', '.join(FIGURES)}")
    if isinstance(manifests, RunManifest):
        manifests = [manifests]
    manifests = list(manifests)
    if not manifests:
        raise FigureError("no runs given")
    want = FIGURES[figure_id]
    for m in manifests:
        if m.experiment != want.value:
            raise FigureError(f"figure {figure_id} needs {want.value} runs, got {m.experiment}")
        if PRIMARY_OUTPUT[want] not in m.files:
            raise FigureError(f"run in {m.out_dir} has no {PRIMARY_OUTPUT[want]}")
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    for idx, m in enumerate(manifests):
        name = _panel_name(figure_id, m, idx, len(manifests))
        rows, plot = _panel(figure_id, m)
        write_csv(out / f"{name}.csv", FIGURE_COLUMNS[figure_id], rows)
        if svg:
            (out / f"{name}.svg").write_text(render_svg(plot, title=name))
    config = "\n".join(m.config for m in manifests)
    return write_manifest(out, f"figure:{figure_id}", config, ",".join(m.relation for m in manifests))


# SVG ------------------------------------------------------------------------

W, H, PAD = 480, 360, 56


def _scale(values, lo_px, hi_px, log=False):
    v = np.asarray(values, dtype=float)
    if log:
        v = np.log10(v)
    lo, hi = float(np.min(v)), float(np.max(v))
    span = hi - lo or 1.0
    return lo_px + (v - lo) / span * (hi_px - lo_px)


def render_svg(plot: dict, title: str = "") -> str:
    parts = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{W}" height="{H}" viewBox="0 0 {W} {H}">',
        f'<rect width="{W}" height="{H}" fill="white"/>',
        f'<text x="{W / 2}" y="20" text-anchor="middle" font-size="14">{escape(title)}</text>',
        f'<line x1="{PAD}" y1="{H - PAD}" x2="{W - 10}" y2="{H - PAD}" stroke="black"/>',
        f'<line x1="{PAD}" y1="{H - PAD}" x2="{PAD}" y2="30" stroke="black"/>',
        f'<text x="{(W + PAD) / 2}" y="{H - 15}" text-anchor="middle" font-size="12">{escape(plot["x"])}</text>',
        f'<text x="15" y="{H / 2}" font-size="12" transform="rotate(-90 15 {H / 2})" text-anchor="middle">{escape(plot["y"])}</text>',
    ]
    if plot["kind"] == "lines":
        parts += _lines(plot)
    else:
        parts += _heatmap(plot)
    parts.append("</svg>")
    return "\n".join(parts) + "\n"


def _lines(plot) -> list[str]:
    series = plot["series"]
    all_x = [x for xs, _ in series.values() for x in xs]
    all_y = [y for _, ys in series.values() for y in ys]
    if not all_x:
        return []
    xlog = plot.get("xlog", False)
    lo_y, hi_y = min(all_y + [0.0]), max(all_y + [1.0])
    out = []
    for k, (name, (xs, ys)) in enumerate(series.items()):
        px = _scale(list(xs) + all_x, PAD, W - 10, xlog)[: len(xs)]
        py = (H - PAD) - (np.asarray(ys, float) - lo_y) / ((hi_y - lo_y) or 1.0) * (H - PAD - 30)
        pts = " ".join(f"{a:.1f},{b:.1f}" for a, b in zip(px, py))
        color = SERIES_COLORS[k % len(SERIES_COLORS)]
        out.append(f'<polyline points="{pts}" fill="none" stroke="{color}" stroke-width="1.5"/>')
        out.append(f'<text x="{W - 120}" y="{40 + 14 * k}" font-size="11" fill="{color}">{escape(name)}</text>')
    v = plot.get("vline")
    if v is not None and min(all_x) <= v <= max(all_x):
        px = _scale([v] + all_x, PAD, W - 10, xlog)[0]
        out.append(f'<line x1="{px:.1f}" y1="30" x2="{px:.1f}" y2="{H - PAD}" stroke="gray" stroke-dasharray="4 3"/>')
    return out


def _heatmap(plot) -> list[str]:
    cells = plot["cells"]
    if not cells:
        return []
    xs = sorted({c[0] for c in cells})
    ys = sorted({c[1] for c in cells})
    cw = (W - 10 - PAD) / len(xs)
    ch = (H - PAD - 30) / len(ys)
    xi = {x: i for i, x in enumerate(xs)}
    yi = {y: i for i, y in enumerate(ys)}
    out = []
    for x, y, label in cells:
        color = PHASE_COLORS.get(label, "#cccccc")
        px = PAD + xi[x] * cw
        py = H - PAD - (yi[y] + 1) * ch
        out.append(f'<rect x="{px:.1f}" y="{py:.1f}" width="{cw:.1f}" height="{ch:.1f}" fill="{color}"><title>{escape(f"{x:g}, {y:g}: {label}")}</title></rect>')
    return out


def default_panels(figure_id: str) -> Sequence[str]:
    """Relations drawn as separate panels when a figure config names none."""
    if figure_id in ("repon-pd", "repon-pd-wd", "critical-fraction-theory", "critical-fraction-exp"):
        return ("modulo:3", "greater_than", "bipartite")
    return ()
