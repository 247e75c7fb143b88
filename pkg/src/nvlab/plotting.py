"""Self-contained SVG plots for traces, fits and heat profiles."""

from __future__ import annotations

import numpy as np
import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402  (backend must be set first)

from .estimator import FitResult, model_eval  # noqa: E402
from .experiment import Trace  # noqa: E402
from .thermal import ProfileFit, predict  # noqa: E402


def save_trace_plot(trace: Trace, path, fit: FitResult | None = None,
                    title: str = ""):
    """Trace with error bars, optionally overlaid with the fitted curve."""
    fig, ax = plt.subplots(figsize=(6.4, 4.0))
    t_us = trace.tau * 1e6
    ax.errorbar(t_us, trace.mean_counts, yerr=trace.stderr, fmt="o", ms=3,
                lw=1, capsize=2, label="data")
    if fit is not None:
        dense = np.linspace(trace.tau[0], trace.tau[-1], 1200)
        ax.plot(dense * 1e6, model_eval(fit.params, dense), "-", lw=1.2,
                label="fit")
        ax.legend(frameon=False)
    ax.set_xlabel("free evolution time (µs)")
    ax.set_ylabel("photons / shot")
    if title:
        ax.set_title(title)
    fig.tight_layout()
    fig.savefig(path, format="svg")
    plt.close(fig)


def save_profile_plot(readings, fit: ProfileFit, path, title: str = ""):
    """Temperature rise vs distance on a log axis with the fitted line."""
    fig, ax = plt.subplots(figsize=(6.4, 4.0))
    r = np.array([p.r for p in readings])
    dt = np.array([p.delta_t for p in readings])
    sig = np.array([p.sigma for p in readings])
    ax.errorbar(r * 1e6, dt, yerr=sig, fmt="o", ms=4, lw=1, capsize=2,
                label="probes")
    dense = np.geomspace(r.min(), r.max(), 300)
    ax.plot(dense * 1e6, predict(fit, dense), "-", lw=1.2,
            label=f"c·ln r + b (R²={fit.r_squared:.4f})")
    ax.set_xscale("log")
    ax.set_xlabel("distance to heater (µm)")
    ax.set_ylabel("temperature rise (K)")
    ax.legend(frameon=False)
    if title:
        ax.set_title(title)
    fig.tight_layout()
    fig.savefig(path, format="svg")
    plt.close(fig)
