"""Small matplotlib helpers for the report paths (file output only)."""

from __future__ import annotations

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt  # noqa: E402


def _setup() -> None:
    plt.rcParams.update({
        "figure.figsize": (6.4, 4.0),
        "font.size": 9,
        "axes.grid": True,
        "grid.alpha": 0.3,
        "lines.linewidth": 1.2,
        "savefig.dpi": 150,
        "savefig.bbox": "tight",
    })


def line_figure(path, x, series: dict, xlabel: str = "", ylabel: str = "",
                title: str = "", logx: bool = False, logy: bool = False,
                markers: bool = False) -> None:
    """Render one line figure with a series dict {label: y} to `path`."""
    _setup()
    fig, ax = plt.subplots()
    for label, y in series.items():
        ax.plot(x, y, marker="o" if markers else None, label=label)
    if logx:
        ax.set_xscale("log")
    if logy:
        ax.set_yscale("log")
    ax.set_xlabel(xlabel)
    ax.set_ylabel(ylabel)
    if title:
        ax.set_title(title)
    if len(series) > 1:
        ax.legend(fontsize=8)
    fig.savefig(path)
    plt.close(fig)


def errorbar_figure(path, x, y, yerr_lo, yerr_hi, xlabel: str = "",
                    ylabel: str = "", title: str = "", logy: bool = False) -> None:
    _setup()
    fig, ax = plt.subplots()
    import numpy as np

    y = np.asarray(y)
    err = np.vstack([y - np.asarray(yerr_lo), np.asarray(yerr_hi) - y])
    ax.errorbar(x, y, yerr=err, marker="o", capsize=3)
    if logy:
        ax.set_yscale("log")
    ax.set_xlabel(xlabel)
    ax.set_ylabel(ylabel)
    if title:
        ax.set_title(title)
    fig.savefig(path)
    plt.close(fig)
