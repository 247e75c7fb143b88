"""Classical dephasing and pulse-error noise for the spin simulation.

The magnetic environment is a per-shot static Gaussian offset plus an
Ornstein-Uhlenbeck process, both entering the level phases as delta(t) * m.
Pulse imperfections are per-pulse rotation-angle multipliers 1 + N(0, sigma).
All draws come from the counter RNG, so a trajectory is a pure function of
(seed, shot index) and the compiled program.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from . import rng
from .pulseprog import TimedInstruction


@dataclass(frozen=True)
class NoiseModel:
    """Dephasing and pulse-error parameters plus the master seed.

    static_sigma: std (Hz) of the per-shot static detuning offset.
    ou_sigma / ou_tau_c: stationary std (Hz) and correlation time (s) of the
    OU component.  pulse_amp_sigma: fractional std of the rotation angle.
    """

    static_sigma: float = 0.0
    ou_sigma: float = 0.0
    ou_tau_c: float = 1e-3
    pulse_amp_sigma: float = 0.0
    seed: int = 0

    def __post_init__(self):
        if self.static_sigma < 0 or self.ou_sigma < 0 or self.pulse_amp_sigma < 0:
            raise ValueError("noise sigmas must be non-negative")
        if self.ou_tau_c <= 0:
            raise ValueError("ou_tau_c must be positive")


@dataclass(frozen=True)
class NoiseTrajectory:
    """Integrated noise for one shot of one compiled program.

    phase_integrals[k] is int delta(t) dt (Hz*s) over the k-th delay
    instruction; pulse_multipliers[j] scales the j-th pulse's angle.
    """

    phase_integrals: np.ndarray
    pulse_multipliers: np.ndarray


def delay_durations(program: list[TimedInstruction]) -> np.ndarray:
    return np.array([ins.duration for ins in program if ins.kind == "delay"])


def pulse_count(program: list[TimedInstruction]) -> int:
    return sum(1 for ins in program if ins.kind == "pulse")


def _substeps(duration, tau_c):
    if duration <= 0:
        return 1
    return max(1, math.ceil(duration / (tau_c / 20.0)))


def ou_update_coefficients(dt, sigma, tau_c):
    """Exact AR(1) step for the stationary OU process over one dt."""
    a = math.exp(-dt / tau_c)
    return a, sigma * math.sqrt(1.0 - a * a)


def ou_segment_coefficients(dt, sigma, tau_c):
    """Coefficients for jointly sampling (end value, time integral) over dt.

    Conditional on the start value x, the pair (x_end, I = int x dt) is
    Gaussian:  x_end = a*x + sx*xi  and  I = mc*x + c1*xi + c2*zeta  with
    independent standard normals xi, zeta.  This makes every segment's phase
    integral exact in distribution regardless of the step size; a series
    expansion covers the small-dt cancellation in the conditional variance.
    """
    u = dt / tau_c
    e = math.expm1(-u)  # a - 1
    a = 1.0 + e
    sx = sigma * math.sqrt(max(-e * (2.0 + e), 0.0))  # sqrt(1 - a^2)
    mc = -tau_c * e  # tau_c * (1 - a)
    if u < 1e-3:
        var_cond = sigma ** 2 * tau_c ** 2 * (u ** 3) * (2.0 / 3.0 - 0.5 * u)
    else:
        var_cond = sigma ** 2 * tau_c ** 2 * (2.0 * u + 2.0 * e - e * e)
    c1 = sigma ** 2 * tau_c * e * e / sx if sx > 0 else 0.0
    c2 = math.sqrt(max(var_cond - c1 * c1, 0.0))
    return a, sx, mc, c1, c2


def ou_process(model: NoiseModel, n_steps: int, dt: float, shots) -> np.ndarray:
    """Stationary OU sample paths, shape (len(shots), n_steps + 1).

    Column 0 is the stationary initial value; subsequent columns advance by
    the exact discrete-time update.  Deterministic in (seed, shot index).
    """
    shots = np.atleast_1d(shots)
    stream = rng.CounterStream(model.seed, rng.STREAM_OU, shots)
    a, sd = ou_update_coefficients(dt, model.ou_sigma, model.ou_tau_c)
    out = np.empty((shots.size, n_steps + 1))
    x = model.ou_sigma * stream.normals(1)[:, 0]
    out[:, 0] = x
    for i in range(n_steps):
        x = a * x + sd * stream.normals(1)[:, 0]
        out[:, i + 1] = x
    return out


def sample_trajectories(program, model: NoiseModel, shot_indices):
    """Noise trajectories for many shots at once.

    Returns (phase_integrals, pulse_multipliers) with shapes (S, n_delays)
    and (S, n_pulses).  Row i is bit-identical to
    sample_trajectory(program, model, shot_indices[i]).
    """
    shots = np.atleast_1d(shot_indices)
    n_shots = shots.size
    durations = delay_durations(program)
    n_pulses = pulse_count(program)

    integrals = np.zeros((n_shots, durations.size))
    if model.static_sigma > 0 and durations.size:
        static = model.static_sigma * rng.normals(
            model.seed, rng.STREAM_STATIC, shots, 0, 1)
        integrals += static * durations

    if model.ou_sigma > 0 and durations.size:
        plan = [_substeps(d, model.ou_tau_c) for d in durations]
        z_all = rng.normals(model.seed, rng.STREAM_OU, shots, 0, 1 + 2 * sum(plan))
        x = model.ou_sigma * z_all[:, 0]
        pos = 1
        for k, (d, m) in enumerate(zip(durations, plan)):
            if d <= 0:
                pos += 2 * m
                continue
            a, sx, mc, c1, c2 = ou_segment_coefficients(
                d / m, model.ou_sigma, model.ou_tau_c)
            acc = np.zeros(n_shots)
            for i in range(m):
                xi = z_all[:, pos + 2 * i]
                zeta = z_all[:, pos + 2 * i + 1]
                acc = acc + mc * x + c1 * xi + c2 * zeta
                x = a * x + sx * xi
            pos += 2 * m
            integrals[:, k] += acc

    if n_pulses and model.pulse_amp_sigma > 0:
        multipliers = 1.0 + model.pulse_amp_sigma * rng.normals(
            model.seed, rng.STREAM_PULSE, shots, 0, n_pulses)
    else:
        multipliers = np.ones((n_shots, n_pulses))
    return integrals, multipliers


def sample_trajectory(program, model: NoiseModel, shot_index: int) -> NoiseTrajectory:
    """Deterministic trajectory for one shot: pure in (seed, shot_index)."""
    integrals, multipliers = sample_trajectories(program, model, [shot_index])
    return NoiseTrajectory(integrals[0], multipliers[0])


def calibrate_static_sigma(target_t2star: float) -> float:
    """Static-dephasing std whose free-induction envelope hits 1/e at target.

    The Gaussian static offset gives exp(-(2 pi sigma t)^2 / 2), so
    sigma = sqrt(2) / (2 pi t).
    """
    if target_t2star <= 0:
        raise ValueError("target_t2star must be positive")
    return math.sqrt(2.0) / (2.0 * math.pi * target_t2star)
