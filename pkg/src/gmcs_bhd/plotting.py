"""Figure rendering for sweeps and noise scans.

Figures go straight to files (SVG or PDF from the suffix); the Agg backend
is selected so nothing needs a display.
"""
from __future__ import annotations

import math

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402

AXIS_LABELS = {
    "repetition": ("Repetition rate (MHz)", 1e-6),
    "cmrr": ("CMRR (dB)", 1.0),
    "lo": ("LO photons per pulse", 1.0),
    "distance": ("Distance (km)", 1.0),
}


def publication_style():
    plt.rcParams.update({
        "font.family": "serif",
        "font.size": 10,
        "axes.linewidth": 0.8,
        "lines.linewidth": 1.4,
        "xtick.direction": "in",
        "ytick.direction": "in",
        "svg.fonttype": "none",
        "pdf.fonttype": 42,
    })


def _figure(width=4.5):
    publication_style()
    golden = (math.sqrt(5) - 1.0) / 2.0
    return plt.subplots(figsize=(width, width * golden))


def plot_sweep(sweep, path, raw: bool = False):
    """Key rate along the sweep axis, with the maximum and cut-offs marked.

    Negative rates are drawn as zero unless ``raw`` is set.
    """
    label, scale = AXIS_LABELS.get(sweep.axis, (sweep.axis, 1.0))
    y = sweep.values
    if not raw:
        y = np.clip(y, 0.0, None)
    fig, ax = _figure()
    if sweep.objective == "per_second":
        ax.plot(sweep.xs * scale, y / 1e6)
        ax.set_ylabel("Secure key rate (Mbit/s)")
        peak = sweep.max_value / 1e6
    else:
        ax.plot(sweep.xs * scale, y)
        ax.set_ylabel("Secure key rate (bit/pulse)")
        peak = sweep.max_value
    if sweep.axis == "lo":
        ax.set_xscale("log")
    ax.plot([sweep.argmax * scale], [max(peak, 0.0) if not raw else peak], "o", ms=4)
    for root, _ in sweep.zero_crossings:
        ax.axvline(root * scale, ls=":", lw=0.8, color="0.4")
    if raw:
        ax.axhline(0.0, lw=0.6, color="0.6")
    ax.set_xlabel(label)
    fig.tight_layout()
    fig.savefig(path)
    plt.close(fig)


def plot_noise_scan(points, fit, path, predicted=None):
    """Quadrature variance versus LO level with the fitted parabola."""
    x = np.array([p[0] for p in points])
    y = np.array([p[1] for p in points])
    fig, ax = _figure()
    ax.plot(x, y, "o", ms=4, label="simulated")
    grid = np.linspace(0.0, x.max(), 200)
    ax.plot(grid, fit(grid), "-", label=f"fit, $R^2$ = {fit.r_squared:.4f}")
    if predicted is not None:
        a, b, c = predicted
        ax.plot(grid, a * grid ** 2 + b * grid + c, "--", lw=1.0, label="analytic")
    ax.set_xlabel("LO photons per pulse")
    ax.set_ylabel(r"Quadrature variance (V$^2$s$^2$)")
    ax.legend(frameon=False, fontsize=8)
    fig.tight_layout()
    fig.savefig(path)
    plt.close(fig)


def plot_quadratures(series, path, max_points: int = 2000):
    """Consecutive-pulse scatter ``X(n+1)`` against ``X(n)``."""
    v = series.values[: max_points + 1]
    fig, ax = _figure(3.5)
    ax.plot(v[:-1], v[1:], ".", ms=2)
    ax.set_xlabel("X(n)")
    ax.set_ylabel("X(n+1)")
    fig.tight_layout()
    fig.savefig(path)
    plt.close(fig)
