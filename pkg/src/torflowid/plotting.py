"""Matplotlib defaults and small helpers for report figures.

Figures are written headless (Agg) next to the text reports.
"""
import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402

RC = {
    "font.family": "serif",
    "font.size": 9,
    "axes.labelsize": 9,
    "axes.titlesize": 10,
    "legend.fontsize": 8,
    "xtick.labelsize": 8,
    "ytick.labelsize": 8,
    "axes.spines.top": False,
    "axes.spines.right": False,
    "savefig.dpi": 150,
    "savefig.bbox": "tight",
    "svg.hashsalt": "torflowid",
}
plt.rcParams.update(RC)

# one colour per classifier, in report order
PALETTE = ("#33638d", "#e07b39", "#5a9e57", "#8c6bb1", "#b8b8b8")


def figsize(scale=1.0, ratio=None):
    width = 6.0 * scale
    ratio = (np.sqrt(5.0) - 1.0) / 2.0 if ratio is None else ratio
    return (width, width * ratio)


def new(scale=1.0, ratio=None):
    return plt.subplots(figsize=figsize(scale, ratio))


def save(fig, path):
    fig.savefig(path, metadata={"Software": None})
    plt.close(fig)


def grouped_bars(ax, groups, series: dict, ylim=(0.0, 1.2)):
    """Bars for each entry of ``series`` (name -> values per group)."""
    x = np.arange(len(groups))
    width = 0.8 / max(1, len(series))
    for i, (name, values) in enumerate(series.items()):
        ax.bar(x + (i - (len(series) - 1) / 2) * width, values, width,
               label=name, color=PALETTE[i % len(PALETTE)])
    ax.set_xticks(x)
    ax.set_xticklabels(groups, rotation=20, ha="right")
    ax.set_ylim(*ylim)
    ax.set_yticks(np.linspace(0.0, 1.0, 6))
    ax.grid(axis="y", lw=0.4, alpha=0.6)
    ax.legend(frameon=False, ncol=min(3, len(series)), loc="upper center")
    return ax
