"""Figure rendering for the command-line report path.

Every CLI command that produces a table also renders a PNG next to it
(unless ``--no-plot`` is given).  The Agg backend is forced so the
renderer works headless, and PNG metadata that would change between
runs is stripped so identical runs produce identical files.
"""

from __future__ import annotations

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt
import numpy as np

_SAVE_KW = {"dpi": 130, "metadata": {"Date": None}}


def _finish(fig, path):
    fig.tight_layout()
    fig.savefig(path, **_SAVE_KW)
    plt.close(fig)


def plot_histogram(path, hist, model_probs=None) -> None:
    """Histogram of photon counts, optionally with a model overlay."""
    fig, ax = plt.subplots(figsize=(6, 4))
    n = np.arange(hist.counts.size)
    ax.bar(n, hist.frequencies(), width=1.0, color="#9ecae1",
           edgecolor="#3182bd", linewidth=0.4, label="data")
    if model_probs is not None:
        m = np.asarray(model_probs)
        ax.plot(np.arange(m.size), m, "k-", lw=1.2, label="model")
        ax.legend()
    ax.set_xlabel("photons per window")
    ax.set_ylabel("probability")
    ax.set_yscale("log")
    ax.set_ylim(bottom=max(0.3 / hist.n_windows, 1e-12))
    _finish(fig, path)


def plot_curve_fit(path, x, y, model_x, model_y, xlabel, ylabel,
                   yerr=None, logx=False, logy=False) -> None:
    """Generic data-plus-model panel used by the fitting commands."""
    fig, ax = plt.subplots(figsize=(6, 4))
    if yerr is not None:
        ax.errorbar(x, y, yerr=yerr, fmt="o", ms=3.5, color="#3182bd",
                    ecolor="#9ecae1", capsize=2, label="data")
    else:
        ax.plot(x, y, "o", ms=3.5, color="#3182bd", label="data")
    ax.plot(model_x, model_y, "-", color="#d7301f", lw=1.3, label="fit")
    if logx:
        ax.set_xscale("log")
    if logy:
        ax.set_yscale("log")
    ax.set_xlabel(xlabel)
    ax.set_ylabel(ylabel)
    ax.legend()
    _finish(fig, path)


def plot_readout_scan(path, rows, front) -> None:
    """Fidelity versus optimal window duration across the scan, with the
    non-dominated front drawn on top."""
    fig, ax = plt.subplots(figsize=(6, 4))
    t = [r.t_R for r in rows]
    f = [r.fidelity for r in rows]
    thr = [r.n_thresh for r in rows]
    sc = ax.scatter(t, f, c=thr, cmap="viridis", s=18, label="scan points")
    if front:
        ax.plot([r.t_R for r in front], [r.fidelity for r in front],
                "r.-", lw=1.2, ms=8, label="best tradeoff")
    fig.colorbar(sc, ax=ax, label="threshold (photons)")
    ax.set_xscale("log")
    ax.set_xlabel("readout window (s)")
    ax.set_ylabel("charge fidelity")
    ax.legend(loc="lower right")
    _finish(fig, path)


def plot_sensitivity(path, curves, xlabel="phase accumulation time (s)") -> None:
    """Sensitivity versus precession time for one or more schemes.

    ``curves`` maps a label to ``(tau_array, eta_array)``.
    """
    fig, ax = plt.subplots(figsize=(6, 4))
    for label, (taus, etas) in curves.items():
        ax.plot(taus, np.asarray(etas) * 1e9, "o-", ms=3, lw=1.1, label=label)
    ax.set_xscale("log")
    ax.set_yscale("log")
    ax.set_xlabel(xlabel)
    ax.set_ylabel("sensitivity (nT/$\\sqrt{\\mathrm{Hz}}$)")
    ax.legend()
    _finish(fig, path)
