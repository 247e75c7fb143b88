"""Monte Carlo experiment runner: programs -> populations -> photon counts.

Shots are vectorized; every random value comes from the counter RNG keyed by
(seed, global shot index), so a sweep is bitwise reproducible for a fixed
master seed regardless of how many threads execute it.
"""

from __future__ import annotations

import csv
import io
import json
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from . import rng
from .noise import NoiseModel, NoiseTrajectory, sample_trajectories
from .pulseprog import ProgramAST, TimedInstruction, compile_program
from .spincore import Calibration, FieldConfig, rotate_amplitudes

TRACE_CSV_HEADER = ("tau_us", "mean_counts", "stderr", "shots")


@dataclass(frozen=True)
class PhotonStats:
    """Mean photons per readout shot for the bright (p0) and dark (p1) states."""

    p0: float
    p1: float

    def __post_init__(self):
        if not self.p0 > self.p1 > 0:
            raise ValueError("require p0 > p1 > 0")


@dataclass(frozen=True)
class Physics:
    """Static physical configuration of one run."""

    calibration: Calibration
    field: FieldConfig
    temperature: float

    def level_rates(self):
        """Deterministic phase rates (Hz) of the m = +1 and m = -1 levels."""
        d = self.calibration.d_of_t(self.temperature)
        gb = self.calibration.gamma_e * self.field.bz
        return d + gb - self.field.omega_plus, d - gb - self.field.omega_minus


@dataclass
class SweepConfig:
    """A full tau sweep: grid, statistics, physics and noise."""

    taus: np.ndarray
    shots: int
    physics: Physics
    noise: NoiseModel
    photon: PhotonStats
    n: int = 1
    photon_sampling: bool = True
    dead_time: float = 45e-6
    threads: int | None = None

    def __post_init__(self):
        self.taus = np.asarray(self.taus, dtype=np.float64)
        if self.taus.ndim != 1 or self.taus.size == 0:
            raise ValueError("taus must be a non-empty 1-D grid")
        if np.any(np.diff(self.taus) <= 0):
            raise ValueError("taus must be strictly increasing")
        if self.shots < 1:
            raise ValueError("shots must be >= 1")


@dataclass
class Trace:
    """Mean counts per shot vs free-evolution time, with standard errors."""

    tau: np.ndarray
    mean_counts: np.ndarray
    stderr: np.ndarray
    shots: int
    meta: dict = field(default_factory=dict)

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(TRACE_CSV_HEADER)
        for t, m, s in zip(self.tau, self.mean_counts, self.stderr):
            w.writerow([repr(float(t) * 1e6), repr(float(m)), repr(float(s)),
                        self.shots])
        return buf.getvalue()

    @classmethod
    def from_csv(cls, text: str) -> "Trace":
        rows = list(csv.reader(io.StringIO(text)))
        if not rows or tuple(rows[0]) != TRACE_CSV_HEADER:
            raise ValueError(f"expected CSV header {','.join(TRACE_CSV_HEADER)}")
        body = [r for r in rows[1:] if r]
        if not body:
            raise ValueError("trace CSV has no data rows")
        tau = np.array([float(r[0]) for r in body]) * 1e-6
        mean = np.array([float(r[1]) for r in body])
        err = np.array([float(r[2]) for r in body])
        shots = int(body[0][3])
        return cls(tau, mean, err, shots)

    def to_json(self) -> str:
        doc = {
            "tau_us": [t * 1e6 for t in self.tau.tolist()],
            "mean_counts": self.mean_counts.tolist(),
            "stderr": self.stderr.tolist(),
            "shots": self.shots,
        }
        doc.update(self.meta)
        return json.dumps(doc, indent=2) + "\n"

    @classmethod
    def from_json(cls, text: str) -> "Trace":
        doc = json.loads(text)
        tau = np.asarray(doc["tau_us"], dtype=np.float64) * 1e-6
        meta = {k: v for k, v in doc.items()
                if k not in ("tau_us", "mean_counts", "stderr", "shots")}
        return cls(tau, np.asarray(doc["mean_counts"], dtype=np.float64),
                   np.asarray(doc["stderr"], dtype=np.float64),
                   int(doc["shots"]), meta)


def run_populations(program, physics: Physics, phase_integrals, multipliers):
    """|0> populations after the program for a batch of noise trajectories.

    phase_integrals has shape (S, n_delays); multipliers (S, n_pulses).
    Starts every shot in |0>; returns shape (S,).
    """
    eps_plus0, eps_minus0 = physics.level_rates()
    n_shots = phase_integrals.shape[0]
    amps = np.zeros((n_shots, 3), dtype=np.complex128)
    amps[:, 1] = 1.0
    k = j = 0
    for ins in program:
        if ins.kind == "delay":
            d = ins.duration
            integral = phase_integrals[:, k]
            amps[:, 0] *= np.exp(-2j * np.pi * (eps_plus0 * d + integral))
            amps[:, 2] *= np.exp(-2j * np.pi * (eps_minus0 * d - integral))
            k += 1
        else:
            amps = rotate_amplitudes(amps, ins.pulse, multipliers[:, j])
            j += 1
    return np.abs(amps[:, 1]) ** 2


def run_shot(program, physics: Physics, trajectory: NoiseTrajectory) -> float:
    """Final |0> population of a single shot under one noise trajectory."""
    p = run_populations(program, physics,
                        trajectory.phase_integrals[None, :],
                        trajectory.pulse_multipliers[None, :])
    return float(p[0])


def sample_photons(p0_population, stats: PhotonStats, shots: int, rng_gen):
    """Poisson photon statistics at a fixed |0> population.

    Each shot draws Poisson(p1 + (p0 - p1) * P0); returns (mean, stderr).
    """
    if not 0.0 <= p0_population <= 1.0 + 1e-12:
        raise ValueError("population must lie in [0, 1]")
    lam = stats.p1 + (stats.p0 - stats.p1) * p0_population
    counts = rng_gen.poisson(lam, size=shots)
    mean = counts.mean()
    err = counts.std(ddof=1) / np.sqrt(shots) if shots > 1 else 0.0
    return float(mean), float(err)


def _poisson_from_uniform(lam, u):
    """Inverse-transform Poisson: one uniform per draw, vectorized."""
    k = np.zeros(lam.shape, dtype=np.int64)
    term = np.exp(-lam)
    cdf = term.copy()
    i = 0
    max_iter = 200 + int(20.0 * float(np.max(lam, initial=0.0)))
    while i < max_iter:
        mask = u >= cdf
        if not mask.any():
            break
        i += 1
        term = term * lam / i
        cdf = cdf + term
        k[mask] += 1
    return k


def resolve_threads(requested=None):
    """Worker count: requested (or a small default) capped by NVLAB_THREADS."""
    base = requested if requested else min(4, os.cpu_count() or 1)
    cap = os.environ.get("NVLAB_THREADS")
    if cap:
        base = min(base, max(1, int(cap)))
    return max(1, base)


def run_sweep(config: SweepConfig, ast: ProgramAST) -> Trace:
    """Simulate the program across the tau grid of `config`.

    Each grid point compiles the program at its tau, runs `shots` independent
    Monte Carlo shots with counter-derived noise, and converts populations to
    photon counts.  With photon_sampling off, the mean is the exact expected
    count and the stderr the would-be shot-noise scale (Poisson plus
    population spread), which keeps fit weights meaningful for noise-free
    contracts.
    """
    stats = config.photon
    contrast = stats.p0 - stats.p1
    shots = config.shots
    seed = config.noise.seed

    def point(i):
        program = compile_program(ast, tau=float(config.taus[i]), n=config.n)
        shot_ids = np.uint64(i) * np.uint64(shots) + np.arange(shots, dtype=np.uint64)
        integrals, multipliers = sample_trajectories(program, config.noise, shot_ids)
        populations = run_populations(program, config.physics, integrals, multipliers)
        lam = stats.p1 + contrast * populations
        if config.photon_sampling:
            u = rng.uniforms(seed, rng.STREAM_PHOTON, shot_ids, 0, 1)[:, 0]
            counts = _poisson_from_uniform(lam, u)
            mean = counts.mean()
            sd = counts.std(ddof=1) if shots > 1 else 0.0
        else:
            mean = lam.mean()
            spread = lam.var(ddof=1) if shots > 1 else 0.0
            sd = np.sqrt(mean + spread)
        return float(mean), float(sd / np.sqrt(shots))

    n_threads = resolve_threads(config.threads)
    if n_threads > 1:
        with ThreadPoolExecutor(max_workers=n_threads) as pool:
            results = list(pool.map(point, range(config.taus.size)))
    else:
        results = [point(i) for i in range(config.taus.size)]

    mean = np.array([r[0] for r in results])
    err = np.array([r[1] for r in results])
    meta = {"seed": seed, "config": config_echo(config)}
    return Trace(config.taus.copy(), mean, err, shots, meta)


def config_echo(config: SweepConfig) -> dict:
    """JSON-ready snapshot of the sweep parameters."""
    phys = config.physics
    return {
        "shots": config.shots,
        "n": config.n,
        "photon_sampling": config.photon_sampling,
        "dead_time_s": config.dead_time,
        "temperature_K": phys.temperature,
        "bz_G": phys.field.bz,
        "omega_minus_Hz": phys.field.omega_minus,
        "omega_plus_Hz": phys.field.omega_plus,
        "calibration": {
            "d0_Hz": phys.calibration.d0,
            "t0_K": phys.calibration.t0,
            "dd_dt_Hz_per_K": phys.calibration.dd_dt,
            "gamma_e_Hz_per_G": phys.calibration.gamma_e,
        },
        "noise": {
            "static_sigma_Hz": config.noise.static_sigma,
            "ou_sigma_Hz": config.noise.ou_sigma,
            "ou_tau_c_s": config.noise.ou_tau_c,
            "pulse_amp_sigma": config.noise.pulse_amp_sigma,
        },
        "photon": {"p0": config.photon.p0, "p1": config.photon.p1},
    }
