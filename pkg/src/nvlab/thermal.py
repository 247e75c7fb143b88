"""Steady-state heat-conduction profile: delta_T = c * ln(r) + b.

Weighted linear least squares of temperature-rise readings against log
distance from a line heater; c = a * Q / kappa ties the log slope to the heat
flux per unit length Q (W/m) and the thermal conductivity kappa (W/(m*K)).
"""

from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass

import numpy as np


@dataclass(frozen=True)
class ProbeReading:
    """One probe: distance to the heater r (m), rise delta_t (K), sigma (K)."""

    r: float
    delta_t: float
    sigma: float

    def __post_init__(self):
        if self.r <= 0:
            raise ValueError("r must be positive")
        if self.sigma <= 0:
            raise ValueError("sigma must be positive")


@dataclass(frozen=True)
class ProfileFit:
    """Weighted fit of delta_T = c * ln(r) + b, with a = c * kappa / Q."""

    c: float
    b: float
    a: float
    c_stderr: float
    b_stderr: float
    r_squared: float
    q: float
    kappa: float
    n_points: int


def fit_log_profile(readings, q: float, kappa: float) -> ProfileFit:
    """Weighted linear least squares of delta_T against ln(r).

    Needs at least two readings with distinct r; standard errors come from
    the supplied per-reading sigmas (unscaled).
    """
    if q <= 0 or kappa <= 0:
        raise ValueError("Q and kappa must be positive")
    readings = list(readings)
    if len(readings) < 2:
        raise ValueError("need at least 2 readings")
    x = np.array([math.log(p.r) for p in readings])
    y = np.array([p.delta_t for p in readings])
    w = np.array([1.0 / p.sigma ** 2 for p in readings])

    sw = w.sum()
    swx = (w * x).sum()
    swy = (w * y).sum()
    swxx = (w * x * x).sum()
    swxy = (w * x * y).sum()
    det = sw * swxx - swx * swx
    if det <= 1e-12 * sw * swxx or np.unique(x).size < 2:
        raise ValueError("all radii identical: log-profile design is singular")

    c = (sw * swxy - swx * swy) / det
    b = (swxx * swy - swx * swxy) / det
    c_err = math.sqrt(sw / det)
    b_err = math.sqrt(swxx / det)

    yhat = c * x + b
    ybar = swy / sw
    ss_res = float((w * (y - yhat) ** 2).sum())
    ss_tot = float((w * (y - ybar) ** 2).sum())
    r2 = 1.0 - ss_res / ss_tot if ss_tot > 0 else 1.0
    return ProfileFit(c=c, b=b, a=c * kappa / q, c_stderr=c_err, b_stderr=b_err,
                      r_squared=r2, q=q, kappa=kappa, n_points=len(readings))


def predict(fit: ProfileFit, r) -> float | np.ndarray:
    """Temperature rise (K) at distance r (m) from the fitted profile."""
    r = np.asarray(r, dtype=np.float64)
    if np.any(r <= 0):
        raise ValueError("r must be positive")
    out = fit.c * np.log(r) + fit.b
    return float(out) if out.ndim == 0 else out


def readings_from_csv(text: str) -> list[ProbeReading]:
    """Parse `r_um,deltaT_K,sigma_K` rows; distances convert to meters."""
    rows = list(csv.reader(io.StringIO(text)))
    if not rows or tuple(rows[0]) != ("r_um", "deltaT_K", "sigma_K"):
        raise ValueError("expected CSV header r_um,deltaT_K,sigma_K")
    body = [r for r in rows[1:] if r]
    if not body:
        raise ValueError("readings CSV has no data rows")
    return [ProbeReading(float(r[0]) * 1e-6, float(r[1]), float(r[2]))
            for r in body]


def readings_to_csv(readings) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(("r_um", "deltaT_K", "sigma_K"))
    for p in readings:
        w.writerow([repr(p.r * 1e6), repr(p.delta_t), repr(p.sigma)])
    return buf.getvalue()
