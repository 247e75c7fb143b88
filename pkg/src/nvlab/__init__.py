"""NV-center pulse-sequence thermometry: simulation, fitting, sensitivity."""

from .spincore import (
    Calibration,
    FieldConfig,
    PulseSpec,
    SpinState,
    apply_pulse,
    free_evolve,
    population,
)
from .pulseprog import (
    ProgramAST,
    PulseSyntaxError,
    CompileError,
    TimedInstruction,
    builtin,
    compile_program,
    parse_pseq,
    print_program,
)
from .noise import (
    NoiseModel,
    NoiseTrajectory,
    calibrate_static_sigma,
    sample_trajectories,
    sample_trajectory,
)
from .experiment import (
    PhotonStats,
    Physics,
    SweepConfig,
    Trace,
    run_populations,
    run_shot,
    run_sweep,
    sample_photons,
)
from .estimator import (
    FitResult,
    FitSeed,
    ThermoResult,
    extract_temperature,
    fit_decay_oscillation,
    fit_envelope,
    initial_guess,
    optimal_sensitivity_time,
    sensitivity,
)
from .thermal import ProbeReading, ProfileFit, fit_log_profile, predict

__version__ = "0.1.0"

__all__ = [
    "Calibration", "FieldConfig", "PulseSpec", "SpinState",
    "apply_pulse", "free_evolve", "population",
    "ProgramAST", "PulseSyntaxError", "CompileError", "TimedInstruction",
    "builtin", "compile_program", "parse_pseq", "print_program",
    "NoiseModel", "NoiseTrajectory", "calibrate_static_sigma",
    "sample_trajectories", "sample_trajectory",
    "PhotonStats", "Physics", "SweepConfig", "Trace",
    "run_populations", "run_shot", "run_sweep", "sample_photons",
    "FitResult", "FitSeed", "ThermoResult", "extract_temperature",
    "fit_decay_oscillation", "fit_envelope", "initial_guess",
    "optimal_sensitivity_time", "sensitivity",
    "ProbeReading", "ProfileFit", "fit_log_profile", "predict",
]
