"""Run-configuration document: JSON schema, validation, object construction.

One JSON file describes a complete simulation: sequence, tau grid, physics,
noise, photon statistics, seed and output paths.  Unknown keys are rejected
everywhere so typos fail loudly.
"""

from __future__ import annotations

import json
from pathlib import Path

import numpy as np
from jsonschema import Draft202012Validator

from .experiment import PhotonStats, Physics, SweepConfig
from .noise import NoiseModel
from .pulseprog import BUILTIN_KINDS, ProgramAST, builtin, parse_pseq
from .spincore import Calibration, FieldConfig

_NUM = {"type": "number"}

RUN_CONFIG_SCHEMA = {
    "$schema": "https://json-schema.org/draft/2020-12/schema",
    "type": "object",
    "additionalProperties": False,
    "required": ["sequence", "sweep", "physics", "photon", "seed"],
    "properties": {
        "sequence": {
            "type": "object",
            "additionalProperties": False,
            "properties": {
                "builtin": {"enum": list(BUILTIN_KINDS)},
                "pseq": {"type": "string"},
                "N": {"type": "integer", "minimum": 1},
                "readout_angle_rad": _NUM,
            },
        },
        "sweep": {
            "type": "object",
            "additionalProperties": False,
            "required": ["shots"],
            "properties": {
                "tau_start_us": _NUM,
                "tau_stop_us": _NUM,
                "points": {"type": "integer", "minimum": 1},
                "tau_us": {"type": "array", "items": _NUM, "minItems": 1},
                "shots": {"type": "integer", "minimum": 1},
            },
        },
        "physics": {
            "type": "object",
            "additionalProperties": False,
            "required": ["temperature_K", "bz_G"],
            "properties": {
                "temperature_K": _NUM,
                "bz_G": _NUM,
                "carriers_Hz": {
                    "type": "object",
                    "additionalProperties": False,
                    "required": ["minus", "plus"],
                    "properties": {"minus": _NUM, "plus": _NUM},
                },
                "detunings_Hz": {
                    "type": "object",
                    "additionalProperties": False,
                    "required": ["minus", "plus"],
                    "properties": {"minus": _NUM, "plus": _NUM},
                },
                "carrier_reference_K": _NUM,
                "calibration": {
                    "type": "object",
                    "additionalProperties": False,
                    "properties": {
                        "d0_Hz": _NUM,
                        "t0_K": _NUM,
                        "dd_dt_Hz_per_K": _NUM,
                        "gamma_e_Hz_per_G": _NUM,
                        "valid_range_K": {
                            "type": "array", "items": _NUM,
                            "minItems": 2, "maxItems": 2,
                        },
                    },
                },
            },
        },
        "noise": {
            "type": "object",
            "additionalProperties": False,
            "properties": {
                "static_sigma_Hz": {"type": "number", "minimum": 0},
                "ou_sigma_Hz": {"type": "number", "minimum": 0},
                "ou_tau_c_s": {"type": "number", "exclusiveMinimum": 0},
                "pulse_amp_sigma": {"type": "number", "minimum": 0},
            },
        },
        "photon": {
            "type": "object",
            "additionalProperties": False,
            "required": ["p0", "p1"],
            "properties": {
                "p0": _NUM,
                "p1": _NUM,
                "sampling": {"type": "boolean"},
            },
        },
        "seed": {"type": "integer"},
        "dead_time_s": {"type": "number", "minimum": 0},
        "threads": {"type": "integer", "minimum": 1},
        "output": {
            "type": "object",
            "additionalProperties": False,
            "properties": {
                "csv": {"type": "string"},
                "json": {"type": "string"},
            },
        },
    },
}


class ConfigError(ValueError):
    """Invalid run configuration (schema or semantic)."""


def validate_config(doc: dict) -> None:
    errors = sorted(Draft202012Validator(RUN_CONFIG_SCHEMA).iter_errors(doc),
                    key=lambda e: list(e.absolute_path))
    if errors:
        e = errors[0]
        where = "/".join(str(p) for p in e.absolute_path) or "<root>"
        raise ConfigError(f"config invalid at {where}: {e.message}")
    seq = doc["sequence"]
    if ("builtin" in seq) == ("pseq" in seq):
        raise ConfigError("sequence must name exactly one of 'builtin' or 'pseq'")
    sweep = doc["sweep"]
    if "tau_us" not in sweep and not all(
            k in sweep for k in ("tau_start_us", "tau_stop_us", "points")):
        raise ConfigError(
            "sweep needs either tau_us or tau_start_us/tau_stop_us/points")
    phys = doc["physics"]
    if ("carriers_Hz" in phys) == ("detunings_Hz" in phys):
        raise ConfigError(
            "physics must name exactly one of 'carriers_Hz' or 'detunings_Hz'")


def load_config(path) -> dict:
    path = Path(path)
    try:
        doc = json.loads(path.read_text())
    except FileNotFoundError:
        raise ConfigError(f"config file not found: {path}")
    except json.JSONDecodeError as err:
        raise ConfigError(f"config {path} is not valid JSON: {err}")
    validate_config(doc)
    return doc


def build_calibration(doc: dict) -> Calibration:
    raw = doc["physics"].get("calibration", {})
    kwargs = {}
    if "d0_Hz" in raw:
        kwargs["d0"] = raw["d0_Hz"]
    if "t0_K" in raw:
        kwargs["t0"] = raw["t0_K"]
    if "dd_dt_Hz_per_K" in raw:
        kwargs["dd_dt"] = raw["dd_dt_Hz_per_K"]
    if "gamma_e_Hz_per_G" in raw:
        kwargs["gamma_e"] = raw["gamma_e_Hz_per_G"]
    if "valid_range_K" in raw:
        kwargs["valid_range"] = tuple(raw["valid_range_K"])
    return Calibration(**kwargs)


def build_sequence(doc: dict, base_dir: Path) -> tuple[ProgramAST, int, str]:
    """Returns (ast, N, label); raises ConfigError for a missing .pseq file."""
    seq = doc["sequence"]
    n = seq.get("N", 1)
    if "builtin" in seq:
        kind = seq["builtin"]
        ast = builtin(kind, n, readout_angle=seq.get("readout_angle_rad"))
        label = f"{kind}-{n}" if kind in ("cpmg", "tcpmg") else kind
        return ast, n, label
    path = Path(seq["pseq"])
    if not path.is_absolute():
        path = base_dir / path
    if not path.exists():
        raise ConfigError(f"sequence file not found: {path}")
    return parse_pseq(path.read_text()), n, path.name


def build_sweep_config(doc: dict, base_dir: Path) -> tuple[SweepConfig, ProgramAST, str]:
    cal = build_calibration(doc)
    phys_doc = doc["physics"]
    temperature = phys_doc["temperature_K"]
    bz = phys_doc["bz_G"]
    if "carriers_Hz" in phys_doc:
        field = FieldConfig(bz=bz,
                            omega_minus=phys_doc["carriers_Hz"]["minus"],
                            omega_plus=phys_doc["carriers_Hz"]["plus"])
    else:
        ref = phys_doc.get("carrier_reference_K", cal.t0)
        det = phys_doc["detunings_Hz"]
        field = FieldConfig.from_detunings(cal, ref, bz, det["minus"], det["plus"])
    physics = Physics(cal, field, temperature)

    noise_doc = doc.get("noise", {})
    noise = NoiseModel(
        static_sigma=noise_doc.get("static_sigma_Hz", 0.0),
        ou_sigma=noise_doc.get("ou_sigma_Hz", 0.0),
        ou_tau_c=noise_doc.get("ou_tau_c_s", 1e-3),
        pulse_amp_sigma=noise_doc.get("pulse_amp_sigma", 0.0),
        seed=doc["seed"],
    )
    photon = PhotonStats(doc["photon"]["p0"], doc["photon"]["p1"])

    sweep_doc = doc["sweep"]
    if "tau_us" in sweep_doc:
        taus = np.asarray(sweep_doc["tau_us"], dtype=np.float64) * 1e-6
    else:
        taus = np.linspace(sweep_doc["tau_start_us"], sweep_doc["tau_stop_us"],
                           sweep_doc["points"]) * 1e-6
    ast, n, label = build_sequence(doc, base_dir)
    config = SweepConfig(
        taus=taus,
        shots=sweep_doc["shots"],
        physics=physics,
        noise=noise,
        photon=photon,
        n=n,
        photon_sampling=doc["photon"].get("sampling", True),
        dead_time=doc.get("dead_time_s", 45e-6),
        threads=doc.get("threads"),
    )
    return config, ast, label
