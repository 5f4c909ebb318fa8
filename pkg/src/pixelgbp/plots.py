"""Error-vs-iteration curves with interquartile bands, as deterministic SVG.

Rows from any number of metric CSVs are grouped by solver label; each label
gets its median curve across runs and, when there is more than one run, a
shaded interquartile band.  Output is plain SVG with a pinned hash salt and
no timestamp, so identical inputs give identical bytes.
"""

from __future__ import annotations

from pathlib import Path

import matplotlib
from matplotlib.backends.backend_svg import FigureCanvasSVG
from matplotlib.figure import Figure
import numpy as np

from .metrics import read_metric_csv

__all__ = ["aggregate_rows", "plot_error_curves"]

_COLORS = {"flat": "#d62728", "sharded": "#1f77b4", "centralized": "#2ca02c"}
_FALLBACK_COLORS = ["#9467bd", "#8c564b", "#e377c2", "#7f7f7f"]


def aggregate_rows(rows, metric: str = "normalized_error") -> dict:
    """Per-label median and quartile curves over runs, keyed by sweep index."""
    if not rows:
        raise ValueError("no metric rows to aggregate")
    grouped = {}
    for row in rows:
        value = getattr(row, metric)
        grouped.setdefault(row.topology, {}).setdefault(row.sweep, []).append(value)
    out = {}
    for label, by_sweep in sorted(grouped.items()):
        sweeps = np.array(sorted(by_sweep))
        stacked = np.array([by_sweep[s] for s in sweeps], dtype=np.float64)
        counts = {len(v) for v in by_sweep.values()}
        if len(counts) != 1:
            raise ValueError(f"ragged run counts for {label!r}: {sorted(counts)}")
        q1, med, q3 = np.percentile(stacked, [25, 50, 75], axis=1)
        out[label] = {
            "sweeps": sweeps,
            "median": med,
            "q1": q1,
            "q3": q3,
            "runs": counts.pop(),
        }
    return out


def plot_error_curves(csv_paths, output_path, metric: str = "normalized_error",
                      title: str = "") -> Path:
    """Render one curve per solver label found across the input CSVs."""
    paths = [Path(p) for p in csv_paths]
    if not paths:
        raise ValueError("at least one CSV input is required")
    rows = []
    for path in paths:
        rows.extend(read_metric_csv(path))
    curves = aggregate_rows(rows, metric=metric)

    with matplotlib.rc_context({"svg.hashsalt": "pixelgbp", "svg.fonttype": "none"}):
        fig = Figure(figsize=(6.4, 4.0))
        FigureCanvasSVG(fig)
        ax = fig.add_subplot(111)
        for i, (label, c) in enumerate(curves.items()):
            color = _COLORS.get(label, _FALLBACK_COLORS[i % len(_FALLBACK_COLORS)])
            ax.plot(c["sweeps"], c["median"], label=label, color=color)
            if c["runs"] > 1:
                ax.fill_between(c["sweeps"], c["q1"], c["q3"],
                                color=color, alpha=0.2, linewidth=0)
        ax.set_xlabel("iteration")
        ax.set_ylabel(metric.replace("_", " "))
        if title:
            ax.set_title(title)
        ax.grid(True, alpha=0.3)
        ax.legend()
        output_path = Path(output_path)
        output_path.parent.mkdir(parents=True, exist_ok=True)
        fig.savefig(output_path, format="svg", metadata={"Date": None})
    return output_path
