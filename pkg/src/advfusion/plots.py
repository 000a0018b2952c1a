"""SVG line charts rendered from trace files."""

from __future__ import annotations

from pathlib import Path

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402

from .sensing import SENSOR_NAMES  # noqa: E402

_METRICS = (
    ("regret", "regret", "regret (m$^2$)"),
    ("spacing_dev_m", "deviation", "|spacing deviation| (m)"),
    ("spacing_m", "spacing", "spacing (m)"),
)


def _x(trace) -> range:
    return range(len(trace["step"]))


def render_trace_plots(trace: dict, out_dir: str | Path, stem: str = "") -> list[Path]:
    """Write actions/regret/deviation/spacing charts; returns the file list."""
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    prefix = f"{stem}_" if stem else ""
    written = []

    fig, (ax_w, ax_a) = plt.subplots(2, 1, figsize=(8, 6), sharex=True)
    for k, name in enumerate(SENSOR_NAMES):
        ax_w.plot(_x(trace), trace[f"w{k + 1}"], label=f"w {name}", linewidth=0.8)
        ax_a.plot(_x(trace), trace[f"a{k + 1}"], label=f"a {name}", linewidth=0.8)
    ax_w.set_ylabel("fusion weight")
    ax_a.set_ylabel("injection (m/s)")
    ax_a.set_xlabel("step")
    ax_w.legend(loc="upper right", fontsize=8)
    ax_a.legend(loc="upper right", fontsize=8)
    path = out_dir / f"{prefix}actions.svg"
    fig.savefig(path)
    plt.close(fig)
    written.append(path)

    for column, fname, ylabel in _METRICS:
        fig, ax = plt.subplots(figsize=(8, 4))
        ax.plot(_x(trace), trace[column], linewidth=0.8)
        ax.set_xlabel("step")
        ax.set_ylabel(ylabel)
        path = out_dir / f"{prefix}{fname}.svg"
        fig.savefig(path)
        plt.close(fig)
        written.append(path)
    return written


def render_comparison(
    trace_a: dict, trace_b: dict, labels: tuple[str, str], out_dir: str | Path
) -> list[Path]:
    """Overlay the scalar metrics of two traces, one chart per metric."""
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    written = []
    for column, fname, ylabel in _METRICS:
        fig, ax = plt.subplots(figsize=(8, 4))
        ax.plot(_x(trace_a), trace_a[column], label=labels[0], linewidth=0.8)
        ax.plot(_x(trace_b), trace_b[column], label=labels[1], linewidth=0.8)
        ax.set_xlabel("step")
        ax.set_ylabel(ylabel)
        ax.legend(loc="upper right", fontsize=8)
        path = out_dir / f"compare_{fname}.svg"
        fig.savefig(path)
        plt.close(fig)
        written.append(path)
    return written
