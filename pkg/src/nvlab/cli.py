"""Command-line front end: simulate | fit | sense | profile | compile.

Exit codes: 0 success (including fits that report converged=false), 1
runtime/numeric failure, 2 usage or configuration failure.
"""

from __future__ import annotations

import argparse
import json
import sys
import time
from pathlib import Path

import numpy as np

from . import estimator, thermal
from .config import ConfigError, build_sweep_config, load_config
from .experiment import PhotonStats, Trace, run_sweep
from .pulseprog import (CompileError, PulseSyntaxError, compile_program,
                        instructions_to_json, parse_pseq)
from .spincore import Calibration, FieldConfig

EXIT_OK = 0
EXIT_RUNTIME = 1
EXIT_USAGE = 2


def _fail(code, message):
    print(f"error: {message}", file=sys.stderr)
    sys.exit(code)


def _read_trace(path: Path) -> Trace:
    text = path.read_text()
    if path.suffix.lower() == ".json":
        return Trace.from_json(text)
    return Trace.from_csv(text)


def cmd_simulate(args):
    try:
        doc = load_config(args.config)
        config, ast, label = build_sweep_config(doc, Path(args.config).parent)
    except (ConfigError, PulseSyntaxError, ValueError) as err:
        _fail(EXIT_USAGE, err)
    t0 = time.time()
    try:
        trace = run_sweep(config, ast)
    except (CompileError, ValueError) as err:
        _fail(EXIT_RUNTIME, err)
    out = doc.get("output", {})
    base = Path(args.config).parent
    wrote = []
    for key, writer in (("csv", trace.to_csv), ("json", trace.to_json)):
        if key in out:
            path = Path(out[key])
            if not path.is_absolute():
                path = base / path
            path.write_text(writer())
            wrote.append(str(path))
    if not wrote:
        sys.stdout.write(trace.to_csv())
    elapsed = time.time() - t0
    print(f"{label} | {config.taus.size} points | {config.shots} shots/point | "
          f"{elapsed:.1f} s" + (f" | wrote {', '.join(wrote)}" if wrote else ""))
    return EXIT_OK


def cmd_fit(args):
    path = Path(args.trace)
    if not path.exists():
        _fail(EXIT_USAGE, f"trace file not found: {path}")
    try:
        trace = _read_trace(path)
    except (ValueError, KeyError) as err:
        _fail(EXIT_USAGE, f"unparseable trace {path}: {err}")
    try:
        seed = estimator.initial_guess(trace)
        fit = estimator.fit_decay_oscillation(trace, seed)
    except ValueError as err:
        _fail(EXIT_RUNTIME, err)

    thermo = None
    if args.carriers is not None:
        if args.detuning_sign is None:
            _fail(EXIT_USAGE, "--carriers requires --detuning-sign (+1 or -1): "
                              "the sign of f is unobservable")
        cal = Calibration()
        field = FieldConfig(bz=0.0, omega_minus=args.carriers[0],
                            omega_plus=args.carriers[1])
        if fit.converged:
            thermo = estimator.extract_temperature(fit, field, cal,
                                                   args.detuning_sign)
    report = estimator.fit_report(fit, thermo)
    text = json.dumps(report, indent=2) + "\n"
    if args.out:
        Path(args.out).write_text(text)
    else:
        sys.stdout.write(text)
    if args.plot:
        from .plotting import save_trace_plot
        save_trace_plot(trace, args.plot, fit=fit)
    if not fit.converged:
        print("warning: fit did not converge (converged=false in report)",
              file=sys.stderr)
    return EXIT_OK


def cmd_sense(args):
    if args.report:
        try:
            doc = json.loads(Path(args.report).read_text())
            p0, p1 = args.p0, args.p1
            td = doc["params"]["TD_s"]
            n = doc["params"]["n"]
        except (OSError, json.JSONDecodeError, KeyError) as err:
            _fail(EXIT_USAGE, f"unusable fit report: {err}")
    else:
        if args.td is None:
            _fail(EXIT_USAGE, "need either --report or --td")
        p0, p1, td, n = args.p0, args.p1, args.td * 1e-6, args.n
    if p0 <= p1:
        _fail(EXIT_USAGE, f"require p0 > p1 (got p0={p0}, p1={p1})")
    stats = PhotonStats(p0, p1)
    if args.t is not None:
        t = args.t * 1e-6
        if t > 3 * td:
            print(f"warning: t = {args.t} µs is beyond 3·TD = {3*td*1e6:.1f} µs; "
                  f"evaluating anyway", file=sys.stderr)
        eta = estimator.sensitivity(stats, td, n, args.dd_dt, t)
        t_used = t
        optimized = False
    else:
        t_used = estimator.optimal_sensitivity_time(td, n)
        eta = estimator.sensitivity(stats, td, n, args.dd_dt, "optimize")
        optimized = True
    doc = {
        "eta_K_per_sqrtHz": eta,
        "t_s": t_used,
        "optimized": optimized,
        "TD_s": td,
        "n": n,
        "p0": p0,
        "p1": p1,
        "dDdT_Hz_per_K": args.dd_dt,
    }
    if args.dead_time is not None:
        # wall-clock figure: same formula with per-shot overhead folded into
        # the bandwidth; not part of the standard eta definition
        overhead = args.dead_time * 1e-6
        doc["eta_wall_clock_K_per_sqrtHz"] = eta * np.sqrt((t_used + overhead) / t_used)
    if args.out:
        Path(args.out).write_text(json.dumps(doc, indent=2) + "\n")
    else:
        sys.stdout.write(json.dumps(doc, indent=2) + "\n")
    label = "optimal" if optimized else "given"
    print(f"eta = {eta*1e3:.2f} mK/sqrt(Hz) at {label} t = {t_used*1e6:.2f} µs")
    return EXIT_OK


def cmd_profile(args):
    path = Path(args.readings)
    if not path.exists():
        _fail(EXIT_USAGE, f"readings file not found: {path}")
    try:
        readings = thermal.readings_from_csv(path.read_text())
    except ValueError as err:
        _fail(EXIT_USAGE, f"unparseable readings {path}: {err}")
    try:
        fit = thermal.fit_log_profile(readings, q=args.q, kappa=args.kappa)
    except ValueError as err:
        _fail(EXIT_RUNTIME, err)
    doc = {
        "c_K": fit.c, "b_K": fit.b, "a": fit.a,
        "c_stderr_K": fit.c_stderr, "b_stderr_K": fit.b_stderr,
        "r_squared": fit.r_squared, "Q_W_per_m": fit.q,
        "kappa_W_per_mK": fit.kappa, "n_points": fit.n_points,
    }
    text = json.dumps(doc, indent=2) + "\n"
    if args.out:
        Path(args.out).write_text(text)
    else:
        sys.stdout.write(text)
    if args.plot:
        from .plotting import save_profile_plot
        save_profile_plot(readings, fit, args.plot)
    return EXIT_OK


def cmd_compile(args):
    path = Path(args.pseq)
    if not path.exists():
        _fail(EXIT_USAGE, f"sequence file not found: {path}")
    try:
        ast = parse_pseq(path.read_text())
        program = compile_program(ast, tau=args.tau_us * 1e-6, n=args.N)
    except PulseSyntaxError as err:
        _fail(EXIT_USAGE, err)
    except CompileError as err:
        _fail(EXIT_RUNTIME, err)
    text = json.dumps(instructions_to_json(program), indent=2) + "\n"
    if args.out:
        Path(args.out).write_text(text)
    else:
        sys.stdout.write(text)
    return EXIT_OK


def build_parser():
    parser = argparse.ArgumentParser(
        prog="nvlab",
        description="Spin-1 pulse-sequence thermometry simulator and fitter.")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("simulate", help="run a sweep from a JSON config")
    p.add_argument("--config", required=True, help="run configuration JSON")
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("fit", help="fit a damped oscillation to a trace")
    p.add_argument("trace", help="trace CSV or JSON")
    p.add_argument("--out", help="write the fit report JSON here")
    p.add_argument("--plot", help="write an SVG of data plus fit")
    p.add_argument("--detuning-sign", type=int, choices=(-1, 1),
                   help="sign of the average detuning (unobservable from f)")
    p.add_argument("--carriers", type=float, nargs=2,
                   metavar=("OMEGA_MINUS", "OMEGA_PLUS"),
                   help="drive carriers in Hz; adds D and T to the report")
    p.set_defaults(func=cmd_fit)

    p = sub.add_parser("sense", help="thermal sensitivity from a fit or params")
    p.add_argument("--report", help="fit report JSON from `nvlab fit`")
    p.add_argument("--td", type=float, help="coherence time TD in µs")
    p.add_argument("--n", type=float, default=2.0, help="stretch exponent")
    p.add_argument("--p0", type=float, default=0.029, help="bright counts/shot")
    p.add_argument("--p1", type=float, default=0.020, help="dark counts/shot")
    p.add_argument("--dd-dt", type=float, default=-74.2e3,
                   help="dD/dT in Hz/K (default -74.2 kHz/K)")
    p.add_argument("--t", type=float,
                   help="evolution time in µs (default: optimize)")
    p.add_argument("--dead-time", type=float,
                   help="per-shot overhead in µs for a wall-clock figure")
    p.add_argument("--out", help="write the sensitivity JSON here")
    p.set_defaults(func=cmd_sense)

    p = sub.add_parser("profile", help="fit delta_T = c ln(r) + b to readings")
    p.add_argument("readings", help="CSV with header r_um,deltaT_K,sigma_K")
    p.add_argument("--q", type=float, default=1.0,
                   help="heater flux per length Q in W/m (scales a only)")
    p.add_argument("--kappa", type=float, default=2000.0,
                   help="thermal conductivity in W/(m*K) (diamond ~2000)")
    p.add_argument("--out", help="write the profile report JSON here")
    p.add_argument("--plot", help="write an SVG of delta_T vs ln r")
    p.set_defaults(func=cmd_profile)

    p = sub.add_parser("compile", help="dump timed instructions from a .pseq")
    p.add_argument("pseq", help="pulse program source file")
    p.add_argument("--tau-us", type=float, required=True,
                   help="total free-evolution time in µs")
    p.add_argument("--N", type=int, default=1, help="sequence order symbol N")
    p.add_argument("--out", help="write the instruction JSON here")
    p.set_defaults(func=cmd_compile)
    return parser


def main(argv=None):
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except SystemExit:
        raise
    except Exception as err:  # surface unexpected failures as runtime errors
        _fail(EXIT_RUNTIME, f"{type(err).__name__}: {err}")


if __name__ == "__main__":
    sys.exit(main())
