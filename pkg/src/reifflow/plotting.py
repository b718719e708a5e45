"""Matplotlib settings and the log-log figure used by every report."""

from __future__ import annotations

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402

golden_mean = (np.sqrt(5) - 1.0) / 2.0
fig_width = 4.5
fig_size = [fig_width, fig_width * golden_mean]
colors = ["#08589e", "#e6550d", "#31a354", "#756bb1", "#636363"]

params = {
    "axes.prop_cycle": matplotlib.cycler(color=colors),
    "axes.labelsize": 9,
    "font.family": "sans-serif",
    "font.sans-serif": ["DejaVu Sans"],
    "font.size": 8,
    "legend.fontsize": 7,
    "legend.frameon": False,
    "xtick.labelsize": 8,
    "ytick.labelsize": 8,
    "figure.figsize": fig_size,
    "lines.markersize": 4,
    "lines.linewidth": 1,
    "figure.subplot.left": 0.16,
    "figure.subplot.bottom": 0.18,
    "figure.subplot.right": 0.96,
    "figure.subplot.top": 0.92,
    # fixed ids and no timestamp keep the SVG byte-identical across runs
    "svg.hashsalt": "reifflow",
    "svg.fonttype": "path",
}


def loglog_svg(path, series, xlabel: str, ylabel: str, title: str = "") -> None:
    """Scatter each series on log-log axes, with its fitted power law if any.

    ``series`` holds ``(label, xs, ys, fit)`` tuples; ``fit`` has
    ``exponent`` and ``prefactor`` attributes or is None.
    """
    with matplotlib.rc_context(params):
        fig, ax = plt.subplots()
        for k, (label, xs, ys, fit) in enumerate(series):
            xs = np.asarray(xs, float)
            ys = np.asarray(ys, float)
            ok = (xs > 0) & (ys > 0) & np.isfinite(ys)
            color = colors[k % len(colors)]
            ax.loglog(xs[ok], ys[ok], "o", color=color, label=label)
            if fit is not None and ok.sum() >= 2:
                grid = np.geomspace(xs[ok].min(), xs[ok].max(), 50)
                ax.loglog(grid, fit.prefactor * grid**fit.exponent, "-", color=color,
                          label=f"slope {fit.exponent:.3f}")
        ax.set_xlabel(xlabel)
        ax.set_ylabel(ylabel)
        if title:
            ax.set_title(title)
        ax.legend()
        fig.savefig(path, format="svg", metadata={"Date": None})
        plt.close(fig)
