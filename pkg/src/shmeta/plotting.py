"""Figures rendered next to the CSV/JSON artifacts.

Uses the non-interactive Agg backend; every function takes the output path
and returns it.
"""

from __future__ import annotations

import math

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402

GOLDEN = (math.sqrt(5) - 1.0) / 2.0
WIDTH = 5.0

STYLE = {
    "font.family": "serif",
    "font.size": 9,
    "mathtext.fontset": "stix",
    "axes.labelsize": 10,
    "legend.fontsize": 8,
    "xtick.labelsize": 8,
    "ytick.labelsize": 8,
    "lines.linewidth": 1.2,
    "lines.markersize": 4,
    "figure.dpi": 150,
    "savefig.bbox": "tight",
}


def _figure():
    fig, ax = plt.subplots(figsize=(WIDTH, WIDTH * GOLDEN))
    return fig, ax


def _save(fig, path):
    fig.savefig(path)
    plt.close(fig)
    return path


def energy_figure(t, energy, dissipation, path):
    with plt.rc_context(STYLE):
        fig, ax = _figure()
        ax.plot(t, energy, label=r"$E_\varepsilon(u(t))$")
        ax.plot(t, energy[0] - np.asarray(dissipation), "--", label=r"$E(0) - $ dissipation")
        ax.set_xlabel("$t$")
        ax.set_ylabel("energy")
        ax.legend()
        return _save(fig, path)


def snapshots_figure(x, snapshots, times, path, max_curves=8):
    with plt.rc_context(STYLE):
        fig, ax = _figure()
        idx = np.unique(np.linspace(0, len(snapshots) - 1, min(max_curves, len(snapshots))).astype(int))
        cmap = plt.get_cmap("viridis")
        for j, i in enumerate(idx):
            ax.plot(x, snapshots[i], color=cmap(j / max(1, len(idx) - 1)), label=f"t = {times[i]:.4g}")
        ax.set_xlabel("$x$")
        ax.set_ylabel("$u$")
        ax.legend(ncol=2)
        return _save(fig, path)


def profile_figure(x, u, path, xlabel="$x$"):
    with plt.rc_context(STYLE):
        fig, ax = _figure()
        ax.plot(x, u)
        ax.axhline(1.0, color="0.6", lw=0.6)
        ax.axhline(-1.0, color="0.6", lw=0.6)
        ax.set_xlabel(xlabel)
        ax.set_ylabel("$u$")
        return _save(fig, path)


def fit_figure(result, path, xlabel, ylabel):
    """Scatter of fitted points, excluded rows omitted, with the fitted and expected lines."""
    with plt.rc_context(STYLE):
        fig, ax = _figure()
        fit = result.fit
        if fit is not None:
            xs, ys = np.array(fit.points).T
            ax.plot(xs, ys, "o", label="measured")
            grid = np.linspace(xs.min(), xs.max(), 50)
            ax.plot(grid, fit.slope * grid + fit.intercept, "-",
                    label=f"fit: slope {fit.slope:.4g}, $r^2$ = {fit.r_squared:.4f}")
            if math.isfinite(result.expected_slope):
                ax.plot(grid, result.expected_slope * (grid - xs.mean()) + ys.mean(), ":",
                        label=f"reference slope {result.expected_slope:.4g}")
            ax.legend()
        else:
            ax.text(0.5, 0.5, "fewer than three usable points", ha="center", va="center",
                    transform=ax.transAxes)
        ax.set_xlabel(xlabel)
        ax.set_ylabel(ylabel)
        return _save(fig, path)
