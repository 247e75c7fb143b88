"""Three-level NV ground-state spin: states, ideal pulses, free evolution.

Everything lives in the doubly-rotating frame of the two microwave drives
with |0> as the phase reference.  Frequencies are stored in Hz (cycles); the
2*pi enters only inside the propagators.  Amplitude order is (+1, 0, -1).
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

TRANSITION_MINUS = "m-1"
TRANSITION_PLUS = "m+1"
TRANSITION_SYM = "sym"
TRANSITIONS = (TRANSITION_MINUS, TRANSITION_PLUS, TRANSITION_SYM)

_IDX = {+1: 0, 0: 1, -1: 2}
_SQRT2 = np.sqrt(2.0)


@dataclass(frozen=True)
class Calibration:
    """Zero-field splitting calibration: D(T) = d0 + dd_dt * (T - t0).

    d0 in Hz at reference temperature t0 (K); dd_dt in Hz/K (negative);
    gamma_e in Hz/G; valid_range is the temperature window the linear slope
    was measured over.
    """

    d0: float = 2.87e9
    t0: float = 300.0
    dd_dt: float = -74.2e3
    gamma_e: float = 2.8e6
    valid_range: tuple[float, float] = (280.0, 330.0)

    def __post_init__(self):
        if self.d0 <= 0:
            raise ValueError("d0 must be positive")
        if self.dd_dt >= 0:
            raise ValueError("dd_dt must be negative")
        if not self.valid_range[0] < self.valid_range[1]:
            raise ValueError("valid_range must be (Tmin, Tmax) with Tmin < Tmax")

    def d_of_t(self, temperature):
        """Zero-field splitting in Hz at the given temperature (K)."""
        return self.d0 + self.dd_dt * (temperature - self.t0)

    def t_of_d(self, d):
        """Temperature (K) at the given zero-field splitting (Hz)."""
        return self.t0 + (d - self.d0) / self.dd_dt

    def in_range(self, temperature):
        return self.valid_range[0] <= temperature <= self.valid_range[1]


@dataclass(frozen=True)
class FieldConfig:
    """Axial field and the two drive carriers.

    bz in G; omega_minus / omega_plus are the carrier frequencies (Hz) driving
    the 0<->-1 and 0<->+1 transitions.  Resonances sit at D(T) -/+ gamma_e*bz.
    """

    bz: float
    omega_minus: float
    omega_plus: float

    def __post_init__(self):
        if self.bz < 0:
            raise ValueError("bz must be non-negative")

    @property
    def carrier_average(self):
        return 0.5 * (self.omega_minus + self.omega_plus)

    @classmethod
    def from_detunings(cls, cal: Calibration, temperature, bz, delta_minus, delta_plus):
        """Carriers placed delta above (positive) the resonances at `temperature`."""
        d = cal.d_of_t(temperature)
        return cls(
            bz=bz,
            omega_minus=d - cal.gamma_e * bz + delta_minus,
            omega_plus=d + cal.gamma_e * bz + delta_plus,
        )


@dataclass(frozen=True)
class PulseSpec:
    """Instantaneous subspace rotation: transition, angle (rad), axis phase.

    axis_phase 0 is X, pi/2 is Y.  The `sym` transition couples |0> to
    (|+1> + |-1>)/sqrt(2) and leaves the antisymmetric combination alone.
    """

    transition: str
    angle: float
    axis_phase: float = 0.0

    def __post_init__(self):
        if self.transition not in TRANSITIONS:
            raise ValueError(f"unknown transition {self.transition!r}")
        if not 0.0 < self.angle <= 2.0 * np.pi:
            raise ValueError("angle must lie in (0, 2*pi]")


class SpinState:
    """Unit-norm complex amplitude triple over (|+1>, |0>, |-1>)."""

    __slots__ = ("amplitudes",)

    def __init__(self, amplitudes):
        amps = np.asarray(amplitudes, dtype=np.complex128)
        if amps.shape != (3,):
            raise ValueError("amplitudes must have shape (3,)")
        norm = np.sqrt(np.sum(np.abs(amps) ** 2))
        if abs(norm - 1.0) > 1e-9:
            raise ValueError(f"state norm {norm} is not 1")
        self.amplitudes = amps

    @classmethod
    def ground(cls):
        return cls([0.0, 1.0, 0.0])

    def population(self, m):
        return float(np.abs(self.amplitudes[_IDX[m]]) ** 2)

    @property
    def norm(self):
        return float(np.sqrt(np.sum(np.abs(self.amplitudes) ** 2)))

    def __repr__(self):
        return f"SpinState({self.amplitudes!r})"


def rotate_amplitudes(amps, pulse: PulseSpec, angle_scale=1.0):
    """Apply the pulse rotation to amplitude arrays of shape (..., 3).

    angle_scale broadcasts against the leading axes, so batched states can
    carry per-shot pulse-amplitude errors.  Returns a new array.
    """
    theta = 0.5 * pulse.angle * np.asarray(angle_scale, dtype=np.float64)
    c = np.cos(theta)
    upper = -1j * np.exp(-1j * pulse.axis_phase) * np.sin(theta)
    lower = -1j * np.exp(1j * pulse.axis_phase) * np.sin(theta)
    out = np.array(amps, dtype=np.complex128, copy=True)
    a0 = out[..., 1]
    if pulse.transition == TRANSITION_MINUS:
        at = out[..., 2]
        out[..., 1], out[..., 2] = c * a0 + upper * at, lower * a0 + c * at
    elif pulse.transition == TRANSITION_PLUS:
        at = out[..., 0]
        out[..., 1], out[..., 0] = c * a0 + upper * at, lower * a0 + c * at
    else:
        bright = (out[..., 0] + out[..., 2]) / _SQRT2
        dark = (out[..., 0] - out[..., 2]) / _SQRT2
        a0n, bn = c * a0 + upper * bright, lower * a0 + c * bright
        out[..., 1] = a0n
        out[..., 0] = (bn + dark) / _SQRT2
        out[..., 2] = (bn - dark) / _SQRT2
    return out


def evolve_amplitudes(amps, duration, eps_plus, eps_minus):
    """Free evolution of (..., 3) amplitudes for `duration` seconds.

    eps_plus / eps_minus are the per-level phase rates (Hz) of m = +1 / -1 in
    the doubly-rotating frame; they broadcast against the leading axes.
    """
    if duration < 0:
        raise ValueError("duration must be non-negative")
    out = np.array(amps, dtype=np.complex128, copy=True)
    two_pi_t = 2.0 * np.pi * duration
    out[..., 0] = out[..., 0] * np.exp(-1j * two_pi_t * np.asarray(eps_plus))
    out[..., 2] = out[..., 2] * np.exp(-1j * two_pi_t * np.asarray(eps_minus))
    return out


def apply_pulse(state: SpinState, pulse: PulseSpec, angle_scale=1.0) -> SpinState:
    """Rotate `state` by pulse.angle * angle_scale about the pulse axis."""
    if angle_scale <= 0:
        raise ValueError("angle_scale must be positive")
    return SpinState(rotate_amplitudes(state.amplitudes, pulse, angle_scale))


def free_evolve(state: SpinState, duration, eps) -> SpinState:
    """Accumulate level phases for `duration` seconds.

    eps is the pair (eps_plus, eps_minus) of detuning rates in Hz for the
    m = +1 and m = -1 levels; |0> is the phase reference and stays fixed.
    """
    eps_plus, eps_minus = eps
    return SpinState(evolve_amplitudes(state.amplitudes, duration, eps_plus, eps_minus))


def population(state: SpinState, m) -> float:
    """Occupation probability of level m in {+1, 0, -1}."""
    return state.population(m)
