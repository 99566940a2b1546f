"""Speed and separation figures for guided episodes, written as SVG with a CSV twin.

Figures are rendered with the Agg-free SVG backend and fixed hash salt and
metadata, so identical traces give byte-identical files.
"""

from __future__ import annotations

import csv
import io
from pathlib import Path

import matplotlib

matplotlib.use("svg")
import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402

from .sim.episode import TRACE_COLUMNS, EpisodeTrace  # noqa: E402

SPEED_COLUMNS = ["t", "vh_x", "vh_y", "vr_x", "vr_y"]
SEPARATION_COLUMNS = ["t", "l"]


def _csv_text(trace: EpisodeTrace, columns) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(columns)
    cols = [trace.column(c) for c in columns]
    for row in zip(*cols):
        w.writerow([repr(float(v)) for v in row])
    return buf.getvalue()


def _svg_text(fig) -> str:
    buf = io.StringIO()
    with matplotlib.rc_context({"svg.hashsalt": "leashguide", "svg.fonttype": "none"}):
        fig.savefig(buf, format="svg", metadata={"Date": None, "Creator": None})
    plt.close(fig)
    return buf.getvalue()


def speed_figure(trace: EpisodeTrace, title: str = "") -> str:
    t = trace.column("t")
    fig, ax = plt.subplots(figsize=(6.0, 3.2))
    ax.plot(t, trace.human_speed, label="person", lw=1.2)
    ax.plot(t, trace.robot_speed, label="robot", lw=1.2, ls="--")
    ax.set_xlabel("time (s)")
    ax.set_ylabel("speed (m/s)")
    ax.grid(alpha=0.3)
    ax.legend(loc="lower right")
    if title:
        ax.set_title(title)
    fig.tight_layout()
    return _svg_text(fig)


def separation_figure(trace: EpisodeTrace, title: str = "") -> str:
    t = trace.column("t")
    lo, hi = trace.l_bounds
    fig, ax = plt.subplots(figsize=(6.0, 3.2))
    ax.plot(t, trace.column("l"), lw=1.2, color="C2")
    ax.axhline(lo, color="0.5", lw=0.8, ls=":")
    ax.axhline(hi, color="0.5", lw=0.8, ls=":")
    ax.set_xlabel("time (s)")
    ax.set_ylabel("separation (m)")
    ax.grid(alpha=0.3)
    if title:
        ax.set_title(title)
    fig.tight_layout()
    return _svg_text(fig)


def write_episode_plots(trace: EpisodeTrace, out_dir, stem: str, title: str = "") -> list:
    """Writes ``{stem}_speed.{svg,csv}`` and ``{stem}_separation.{svg,csv}``; returns the paths."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    files = []
    for kind, fig_fn, cols in (("speed", speed_figure, SPEED_COLUMNS),
                               ("separation", separation_figure, SEPARATION_COLUMNS)):
        svg, tab = out / f"{stem}_{kind}.svg", out / f"{stem}_{kind}.csv"
        svg.write_text(fig_fn(trace, title))
        tab.write_text(_csv_text(trace, cols))
        files += [svg, tab]
    return files


def loss_figure(curves: dict, title: str = "") -> str:
    """Log-scale monitor loss per epoch for each named curve."""
    fig, ax = plt.subplots(figsize=(5.0, 3.2))
    for name, y in curves.items():
        y = np.asarray(y, float)
        ax.semilogy(np.arange(len(y)), y, label=name, lw=1.2)
    ax.set_xlabel("epoch")
    ax.set_ylabel("rollout loss")
    ax.grid(alpha=0.3, which="both")
    if curves:
        ax.legend()
    if title:
        ax.set_title(title)
    fig.tight_layout()
    return _svg_text(fig)


assert set(SPEED_COLUMNS + SEPARATION_COLUMNS) <= set(TRACE_COLUMNS)

__all__ = ["SEPARATION_COLUMNS", "SPEED_COLUMNS", "loss_figure", "separation_figure", "speed_figure",
           "write_episode_plots"]
