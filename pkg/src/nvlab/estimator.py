"""Trace fitting and thermometry: damped oscillation model, D, T and eta.

The signal model is I(t) = a * exp(-(t/TD)^n) * cos(2 pi f t + phi) + b.
Fits run a damped (Levenberg-style) Gauss-Newton iteration with a numeric
central-difference Jacobian and 1/stderr^2 weights.  The oscillation
frequency measures |carrier average - D|, from which temperature follows via
the calibration slope; the caller must supply the detuning sign because the
sign of f is unobservable.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .experiment import PhotonStats, Trace
from .spincore import Calibration, FieldConfig

PARAM_NAMES = ("a", "n", "phi", "b", "TD", "f")
N_BOUNDS = (0.5, 4.0)
_MAX_ITER = 200
_STEP_REL = 1e-6
_CONVERGENCE = 1e-8


@dataclass
class FitSeed:
    """Starting point for the oscillation fit; degenerate means zero signal."""

    params: np.ndarray
    degenerate: bool = False


@dataclass
class FitResult:
    """Fitted model parameters with uncertainties.

    params order is (a, n, phi, b, TD, f); TD in seconds, f in Hz.
    Standard errors come from the residual-scaled inverse normal matrix.
    """

    params: np.ndarray
    stderrs: np.ndarray
    covariance: np.ndarray
    converged: bool
    residual_norm: float
    iterations: int = 0

    def __getattr__(self, name):
        if name in PARAM_NAMES:
            return float(self.params[PARAM_NAMES.index(name)])
        raise AttributeError(name)

    def stderr(self, name):
        return float(self.stderrs[PARAM_NAMES.index(name)])


@dataclass
class ThermoResult:
    """Zero-field splitting and temperature derived from a fitted frequency."""

    d: float
    temperature: float
    delta_t: float
    precision: float
    detuning_sign: int
    in_range: bool


def model_eval(params, t):
    a, n, phi, b, td, f = params
    return a * np.exp(-((t / td) ** n)) * np.cos(2.0 * np.pi * f * t + phi) + b


def initial_guess(trace: Trace) -> FitSeed:
    """Seed the fit from a discrete Fourier transform of the trace.

    b is the mean, f the dominant non-DC peak (non-uniform grids are
    interpolated onto a uniform one), a is sqrt(2) times the rms deviation,
    phi the peak's complex phase, TD half the sweep span and n = 2.
    """
    t = trace.tau
    y = trace.mean_counts
    if t.size < 8:
        raise ValueError("need at least 8 points to seed a fit")
    b = float(np.mean(y))
    resid = y - b
    span = float(t[-1] - t[0])
    dt = np.diff(t)
    if np.allclose(dt, dt[0], rtol=1e-9, atol=0.0):
        tu, yu = t, resid
    else:
        tu = np.linspace(t[0], t[-1], t.size)
        yu = np.interp(tu, t, resid)
    # zero-padding interpolates the spectrum so short sweeps seed cleanly
    spectrum = np.fft.rfft(yu, n=8 * tu.size)
    freqs = np.fft.rfftfreq(8 * tu.size, float(tu[1] - tu[0]))
    peak = 1 + int(np.argmax(np.abs(spectrum[1:])))
    f = float(freqs[peak])
    phi = float(np.angle(spectrum[peak]) - 2.0 * np.pi * f * t[0])
    phi = math.remainder(phi, 2.0 * math.pi)
    a = float(np.sqrt(2.0) * np.std(resid))
    scale = max(abs(b), 1.0)
    degenerate = a < 1e-12 * scale
    params = np.array([a, 2.0, phi, b, 0.5 * span, f])
    return FitSeed(params, degenerate=degenerate)


def _project(params):
    params[1] = np.clip(params[1], *N_BOUNDS)
    params[4] = max(params[4], 1e-30)
    params[5] = abs(params[5])
    return params


def _jacobian(params, t, scales):
    jac = np.empty((t.size, params.size))
    for i in range(params.size):
        h = _STEP_REL * max(abs(params[i]), 0.01 * scales[i])
        up = params.copy()
        dn = params.copy()
        up[i] += h
        dn[i] -= h
        jac[:, i] = (model_eval(up, t) - model_eval(dn, t)) / (2.0 * h)
    return jac


def fit_decay_oscillation(trace: Trace, seed) -> FitResult:
    """Weighted least-squares fit of the damped oscillation model.

    `seed` is a FitSeed or a 6-vector (a, n, phi, b, TD, f).  Traces with
    non-positive stderr entries fall back to unit weights.  Non-convergence
    and singular normal matrices return the best point found with
    converged=False instead of raising.
    """
    t = trace.tau
    y = trace.mean_counts
    if t.size < 8:
        raise ValueError("need at least 8 points to fit")
    params = np.asarray(seed.params if isinstance(seed, FitSeed) else seed,
                        dtype=np.float64).copy()
    if params.size != 6 or not np.all(np.isfinite(params)):
        raise ValueError("seed must be 6 finite parameters (a, n, phi, b, TD, f)")
    if np.all(trace.stderr > 0):
        w = 1.0 / trace.stderr ** 2
    else:
        w = np.ones_like(y)

    span = float(t[-1] - t[0])
    yscale = max(float(np.std(y)), abs(float(np.mean(y))), 1e-30)
    scales = np.array([yscale, 1.0, 1.0, yscale, span, max(1.0 / span, abs(params[5]))])

    def cost(p):
        r = y - model_eval(p, t)
        return float(np.sum(w * r * r)), r

    params = _project(params)
    best_cost, resid = cost(params)
    lam = 1e-3
    converged = False
    singular = False
    iterations = 0
    stalled = 0
    for iterations in range(1, _MAX_ITER + 1):
        # work in units of `scales` so the normal matrix is well conditioned
        jac = _jacobian(params, t, scales) * scales
        jtw = jac.T * w
        normal = jtw @ jac
        grad = jtw @ resid
        diag = np.diag(normal).copy()
        floor = 1e-14 * max(float(diag.max()), 1e-300)
        diag[diag <= floor] = floor
        step_ok = False
        for _ in range(25):
            try:
                delta = np.linalg.solve(normal + lam * np.diag(diag), grad)
            except np.linalg.LinAlgError:
                singular = True
                break
            if not np.all(np.isfinite(delta)):
                singular = True
                break
            candidate = _project(params + delta * scales)
            new_cost, new_resid = cost(candidate)
            if new_cost <= best_cost:
                rel = np.max(np.abs(candidate - params) /
                             np.maximum(np.abs(params), scales))
                drop = best_cost - new_cost
                stalled = stalled + 1 if drop <= 1e-12 * max(best_cost, 1e-300) else 0
                params, best_cost, resid = candidate, new_cost, new_resid
                lam = max(lam / 3.0, 1e-12)
                step_ok = True
                if rel < _CONVERGENCE or stalled >= 3:
                    converged = True
                break
            lam *= 10.0
        if converged or singular or not step_ok:
            break

    jac = _jacobian(params, t, scales) * scales
    jtw = jac.T * w
    normal = jtw @ jac
    dof = max(t.size - params.size, 1)
    sigma2 = best_cost / dof
    cov, stderrs = _covariance(normal, sigma2, scales)
    return FitResult(params, stderrs, cov, converged and not singular,
                     math.sqrt(best_cost), iterations)


def _covariance(normal, sigma2, scales):
    """Scaled inverse normal matrix; unidentifiable directions get inf.

    `normal` is in scaled (dimensionless) parameter units; the returned
    covariance is in original units.
    """
    diag = np.diag(normal)
    top = max(float(diag.max()), 1e-300)
    dead = diag <= 1e-9 * top
    outer = np.outer(scales, scales)
    try:
        if dead.any():
            raise np.linalg.LinAlgError
        cov = sigma2 * np.linalg.inv(normal) * outer
    except np.linalg.LinAlgError:
        live = ~dead
        cov = np.zeros_like(normal)
        if live.any():
            sub = normal[np.ix_(live, live)]
            cov[np.ix_(live, live)] = sigma2 * np.linalg.pinv(sub)
        cov = cov * outer
        cov[dead, :] = np.inf
        cov[:, dead] = np.inf
    stderrs = np.sqrt(np.maximum(np.diag(cov), 0.0))
    return cov, stderrs


def fit_envelope(trace: Trace, seed=None, fixed_n: float | None = None,
                 fixed_b: float | None = None) -> FitResult:
    """Fit a * exp(-(t/TD)^n) + b by pinning the oscillation to f=0, phi=0.

    Convenience for pure decay curves (CPMG coherence traces); returns a full
    FitResult whose f and phi stay at zero.  fixed_n holds the stretch
    exponent and fixed_b the baseline: small decay-rate differences between
    related curves trade off almost freely against (n, b), so comparisons of
    TD are only sharp with those nuisances pinned.
    """
    t = trace.tau
    y = trace.mean_counts
    if seed is None:
        a0 = float(y.max() - y.min())
        b0 = fixed_b if fixed_b is not None else float(y.min())
        span = float(t[-1] - t[0])
        crossing = y < b0 + a0 / math.e
        td0 = float(t[np.argmax(crossing)]) if crossing.any() else 0.5 * span
        seed = np.array([a0, fixed_n if fixed_n else 2.0, 0.0, b0,
                         max(td0, t[0]), 0.0])
    seed = np.asarray(seed, dtype=np.float64).copy()
    free_set = [0, 1, 3, 4]  # a, n, b, TD
    if fixed_n is not None:
        seed[1] = fixed_n
        free_set.remove(1)
    if fixed_b is not None:
        seed[3] = fixed_b
        free_set.remove(3)
    free = np.array(free_set)

    if np.all(trace.stderr > 0):
        w = 1.0 / trace.stderr ** 2
    else:
        w = np.ones_like(y)
    params = seed.copy()
    span = float(t[-1] - t[0])
    yscale = max(float(np.std(y)), 1e-30)
    scales = np.array([yscale, 1.0, 1.0, yscale, span, 1.0])

    def cost(p):
        r = y - model_eval(p, t)
        return float(np.sum(w * r * r)), r

    best_cost, resid = cost(params)
    lam = 1e-3
    converged = False
    stalled = 0
    for _ in range(_MAX_ITER):
        jac = _jacobian(params, t, scales)[:, free] * scales[free]
        jtw = jac.T * w
        normal = jtw @ jac
        grad = jtw @ resid
        diag = np.diag(normal).copy()
        floor = 1e-14 * max(float(diag.max()), 1e-300)
        diag[diag <= floor] = floor
        stepped = False
        for _ in range(25):
            try:
                delta = np.linalg.solve(normal + lam * np.diag(diag), grad)
            except np.linalg.LinAlgError:
                break
            candidate = params.copy()
            candidate[free] += delta * scales[free]
            candidate = _project(candidate)
            new_cost, new_resid = cost(candidate)
            if new_cost <= best_cost:
                rel = np.max(np.abs(candidate - params)[free] /
                             np.maximum(np.abs(params[free]), scales[free]))
                drop = best_cost - new_cost
                stalled = stalled + 1 if drop <= 1e-12 * max(best_cost, 1e-300) else 0
                params, best_cost, resid = candidate, new_cost, new_resid
                lam = max(lam / 3.0, 1e-12)
                stepped = True
                if rel < _CONVERGENCE or stalled >= 3:
                    converged = True
                break
            lam *= 10.0
        if converged or not stepped:
            break

    jac = _jacobian(params, t, scales)[:, free] * scales[free]
    jtw = jac.T * w
    dof = max(t.size - free.size, 1)
    sigma2 = best_cost / dof
    stderrs = np.zeros(6)
    cov = np.zeros((6, 6))
    cov_free, err_free = _covariance(jtw @ jac, sigma2, scales[free])
    stderrs[free] = err_free
    cov[np.ix_(free, free)] = cov_free
    return FitResult(params, stderrs, cov, converged, math.sqrt(best_cost))


def extract_temperature(fit: FitResult, field_cfg: FieldConfig, cal: Calibration,
                        detuning_sign: int) -> ThermoResult:
    """Temperature from the fitted oscillation frequency.

    D = carrier average - sign * f; the sign of the average detuning is not
    observable from |f| and must come from the caller.
    """
    if detuning_sign not in (-1, 1):
        raise ValueError("detuning_sign must be +1 or -1")
    if not fit.converged:
        raise ValueError("fit did not converge; refusing to derive a temperature")
    d = field_cfg.carrier_average - detuning_sign * fit.f
    temperature = cal.t_of_d(d)
    precision = fit.stderr("f") / abs(cal.dd_dt)
    return ThermoResult(
        d=d,
        temperature=temperature,
        delta_t=temperature - cal.t0,
        precision=precision,
        detuning_sign=detuning_sign,
        in_range=cal.in_range(temperature),
    )


def sensitivity(stats: PhotonStats, t_d: float, n: float, dd_dt: float,
                t="optimize") -> float:
    """Thermal sensitivity eta in K/sqrt(Hz) at evolution time t.

    eta = sqrt(2 (p0 + p1) / (p0 - p1)^2) / (2 pi |dD/dT| exp(-(t/TD)^n) sqrt(t)).
    With t="optimize", minimizes over t in (0, 3 TD] by golden section to
    1e-4 relative.
    """
    if t_d <= 0:
        raise ValueError("TD must be positive")
    shot = math.sqrt(2.0 * (stats.p0 + stats.p1) / (stats.p0 - stats.p1) ** 2)

    def eta_at(tt):
        envelope = math.exp(-((tt / t_d) ** n))
        return shot / (2.0 * math.pi * abs(dd_dt) * envelope * math.sqrt(tt))

    if isinstance(t, str):
        if t != "optimize":
            raise ValueError("t must be a time in seconds or 'optimize'")
        return eta_at(optimal_sensitivity_time(t_d, n))
    if t <= 0:
        raise ValueError("t must be positive")
    return eta_at(float(t))


def optimal_sensitivity_time(t_d: float, n: float) -> float:
    """Golden-section minimizer of eta over t in (0, 3 TD], 1e-4 relative.

    Minimizes (t/TD)^n - ln(t)/2, the negative log of the signal factor, which
    shares its argmin with eta and is better conditioned.
    """
    inv_phi = (math.sqrt(5.0) - 1.0) / 2.0

    def objective(tt):
        return (tt / t_d) ** n - 0.5 * math.log(tt)

    lo, hi = 1e-6 * t_d, 3.0 * t_d
    c = hi - inv_phi * (hi - lo)
    d = lo + inv_phi * (hi - lo)
    fc, fd = objective(c), objective(d)
    while (hi - lo) > 1e-4 * hi:
        if fc < fd:
            hi, d, fd = d, c, fc
            c = hi - inv_phi * (hi - lo)
            fc = objective(c)
        else:
            lo, c, fc = c, d, fd
            d = lo + inv_phi * (hi - lo)
            fd = objective(d)
    return 0.5 * (lo + hi)


def fit_report(fit: FitResult, thermo: ThermoResult | None = None,
               eta: float | None = None) -> dict:
    """JSON-ready report of a fit, optionally with derived thermometry."""
    doc = {
        "params": {
            "a": fit.a, "n": fit.n, "phi_rad": fit.phi, "b": fit.b,
            "TD_s": fit.TD, "f_Hz": fit.f,
        },
        "stderrs": {
            "a": fit.stderr("a"), "n": fit.stderr("n"),
            "phi_rad": fit.stderr("phi"), "b": fit.stderr("b"),
            "TD_s": fit.stderr("TD"), "f_Hz": fit.stderr("f"),
        },
        "covariance": fit.covariance.tolist(),
        "converged": fit.converged,
        "residual_norm": fit.residual_norm,
    }
    if thermo is not None:
        doc["D_Hz"] = thermo.d
        doc["T_K"] = thermo.temperature
        doc["precision_K"] = thermo.precision
        doc["detuning_sign"] = thermo.detuning_sign
        doc["T_in_calibrated_range"] = thermo.in_range
    if eta is not None:
        doc["eta_K_per_sqrtHz"] = eta
    return doc
