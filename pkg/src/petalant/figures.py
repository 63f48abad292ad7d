"""Render comparison figures from a summary CSV.

One PNG per metric: a bar of the per-protocol mean across seeds with the
individual seed values scattered on top. Figures land next to the
delimited output so a results directory is self-contained.
"""

from __future__ import annotations

from pathlib import Path

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt

from .metrics import read_summary

FIGURE_METRICS = (
    ("packets_sent", "packets generated"),
    ("packets_received", "packets received"),
    ("pdf", "packet delivery fraction (%)"),
    ("avg_delay_ms", "end-to-end delay (ms)"),
    ("throughput_kbps", "throughput (kbit/s)"),
    ("overhead", "control tx per delivered packet"),
    ("energy_j", "energy consumed (J)"),
)

_BAR_COLOR = "#7aa6c2"
_DOT_COLOR = "#2d3a45"


def render_figures(summary_path, out_dir=None) -> list[Path]:
    summary_path = Path(summary_path)
    out_dir = Path(out_dir) if out_dir is not None else summary_path.parent
    out_dir.mkdir(parents=True, exist_ok=True)
    _, rows = read_summary(summary_path)
    seed_rows = [r for r in rows if r["seed"] != "AVG"]
    if not seed_rows:
        raise ValueError(f"no per-seed rows in {summary_path}")
    protocols = sorted({r["protocol"] for r in seed_rows})

    written = []
    for metric, label in FIGURE_METRICS:
        fig, ax = plt.subplots(figsize=(5.0, 3.4))
        means = []
        for i, protocol in enumerate(protocols):
            values = [r[metric] for r in seed_rows if r["protocol"] == protocol]
            mean = sum(values) / len(values)
            means.append(mean)
            ax.scatter([i] * len(values), values, s=14, zorder=3,
                       color=_DOT_COLOR, alpha=0.7)
        ax.bar(range(len(protocols)), means, width=0.55, color=_BAR_COLOR, zorder=2)
        for i, mean in enumerate(means):
            ax.annotate(f"{mean:.3g}", (i, mean), ha="center", va="bottom",
                        fontsize=8, xytext=(0, 2), textcoords="offset points")
        ax.set_xticks(range(len(protocols)))
        ax.set_xticklabels(protocols)
        ax.set_ylabel(label)
        ax.set_title(f"mean {label} by protocol")
        ax.spines["top"].set_visible(False)
        ax.spines["right"].set_visible(False)
        fig.tight_layout()
        target = out_dir / f"fig_{metric}.png"
        fig.savefig(target, dpi=150)
        plt.close(fig)
        written.append(target)
    return written
