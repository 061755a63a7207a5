"""Command-line interface.

Exit codes: 0 success, 2 usage error, 3 numeric failure.  Every file written
with ``--out`` gets a ``<out>.manifest.json`` describing how to regenerate it;
``pulsesir replay MANIFEST`` re-runs the command and compares digests.
"""

from __future__ import annotations

import argparse
import hashlib
import io
import json
import math
import platform
import sys
import time
from pathlib import Path

import numpy as np

from . import __version__
from . import closedform as cf
from .analysis import (
    ConvergenceError,
    SweepGrid,
    classify_empirical,
    find_endemic_orbit,
    lyapunov_max,
    sweep_bifurcation_plane,
)
from .integrator import IntegrationError, IntegratorConfig, integrate, integrate_suspended, monodromy_numeric
from .model import DomainError, ExistenceError, ModelParams, SeasonalForcing, State, trapping_bound

EXIT_OK, EXIT_USAGE, EXIT_NUMERIC = 0, 2, 3


class UsageError(Exception):
    pass


def fmt(x) -> str:
    if x is None:
        return ""
    if isinstance(x, str):
        return x
    return format(float(x), ".17g")


def _finite_or_none(x):
    if x is None:
        return None
    x = float(x)
    return x if math.isfinite(x) else None


# ------------------------------------------------------------------ parsing


def _common(p: argparse.ArgumentParser):
    g = p.add_argument_group("model")
    g.add_argument("--A", type=float, default=1.0)
    g.add_argument("--beta0", type=float, default=0.9)
    g.add_argument("--sigma", type=float, default=None, help="mu + d (default 0.2)")
    g.add_argument("--g", type=float, default=0.5)
    g.add_argument("--mu", type=float, default=None)
    g.add_argument("--d", type=float, default=None)
    g.add_argument("--p", type=float, default=0.0)
    g.add_argument("--T", type=float, default=4.0)
    g.add_argument("--gamma", type=float, default=0.0)
    g.add_argument("--omega", type=float, default=1.0)
    g.add_argument("--psi", default="cos1", help="cos1 or file:PATH")
    s = p.add_argument_group("state and integration")
    s.add_argument("--s0", type=float, default=0.5)
    s.add_argument("--i0", type=float, default=0.4)
    s.add_argument("--r0", type=float, default=0.0)
    s.add_argument("--theta0", type=float, default=None)
    s.add_argument("--t-end", type=float, default=400.0)
    s.add_argument("--rel-tol", type=float, default=1e-9)
    s.add_argument("--abs-tol", type=float, default=1e-11)
    s.add_argument("--dt", type=float, default=0.05, help="sampling interval of stored series")
    o = p.add_argument_group("output")
    o.add_argument("--out", default=None)
    o.add_argument("--format", choices=("csv", "json"), default=None)
    o.add_argument("--seed", type=int, default=0)
    o.add_argument("--jobs", type=int, default=1)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="pulsesir", description="Pulse-vaccinated SIR model toolkit.", allow_abbrev=False)
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    def add(name, help_):
        sp = sub.add_parser(name, help=help_, allow_abbrev=False)
        _common(sp)
        return sp

    add("simulate", "integrate a trajectory and write t,S,I,R[,theta],impulse")
    sp = add("curves", "threshold curves p1, p2 (and seasonal p2) on a T grid")
    sp.add_argument("--T-min", type=float, default=0.1)
    sp.add_argument("--T-max", type=float, default=10.0)
    sp.add_argument("--n-T", type=int, default=100)
    sp = add("sweep", "empirical vs analytic regime labels on a (T, p) grid")
    sp.add_argument("--T-min", type=float, default=0.5)
    sp.add_argument("--T-max", type=float, default=8.0)
    sp.add_argument("--n-T", type=int, default=20)
    sp.add_argument("--p-min", type=float, default=0.02)
    sp.add_argument("--p-max", type=float, default=0.98)
    sp.add_argument("--n-p", type=int, default=20)
    sp.add_argument("--horizon-periods", type=float, default=50.0)
    sp.add_argument("--tol", type=float, default=1e-6)
    sp.add_argument("--report", default=None, help="discrepancy report path (JSON)")
    add("floquet", "analytic and numeric Floquet multipliers of the disease-free orbit")
    sp = add("lyapunov", "largest Lyapunov exponent")
    sp.add_argument("--renorm-every", type=float, default=None)
    sp.add_argument("--transient", type=float, default=0.2)
    sp = add("classify", "empirical omega-limit classification")
    sp.add_argument("--tol", type=float, default=1e-6)
    sp.add_argument("--samples", type=int, default=0, help="extra random initial conditions (uses --seed)")
    add("endemic-orbit", "locate the period-T endemic orbit")
    rp = sub.add_parser("replay", help="re-run a manifest and verify output digests", allow_abbrev=False)
    rp.add_argument("manifest")
    return parser


def _params_from(args) -> ModelParams:
    sigma = args.sigma
    mu = args.mu
    if args.mu is not None and args.d is not None:
        derived = args.mu + args.d
        if sigma is not None and not math.isclose(sigma, derived, rel_tol=1e-12, abs_tol=1e-15):
            raise UsageError(f"--sigma {sigma} conflicts with --mu + --d = {derived}")
        sigma = derived
    elif args.d is not None:
        sigma = 0.2 if sigma is None else sigma
        mu = sigma - args.d
        if mu < 0:
            raise UsageError("--d exceeds --sigma")
    sigma = 0.2 if sigma is None else sigma
    if args.psi == "cos1":
        psi = SeasonalForcing()
    elif args.psi.startswith("file:"):
        try:
            psi = SeasonalForcing.from_file(args.psi[5:])
        except OSError as exc:
            raise UsageError(f"cannot read forcing table: {exc}") from None
    else:
        raise UsageError("--psi must be cos1 or file:PATH")
    return ModelParams(A=args.A, beta0=args.beta0, sigma=sigma, g=args.g, mu=mu, p=args.p, T=args.T,
                       gamma=args.gamma, omega=args.omega, psi=psi)


def _config_from(args) -> IntegratorConfig:
    return IntegratorConfig(rel_tol=args.rel_tol, abs_tol=args.abs_tol, dense_output_dt=args.dt)


# ------------------------------------------------------------------ commands


def cmd_simulate(args, params, config):
    suspended = args.theta0 is not None
    if suspended:
        traj = integrate_suspended(params, config, (args.s0, args.i0, args.theta0, args.r0), args.t_end)
    else:
        traj = integrate(params, config, State(args.s0, args.i0, args.r0, 0.0), args.t_end)
    buf = io.StringIO()
    buf.write("t,S,I,R,theta,impulse\n" if suspended else "t,S,I,R,impulse\n")
    cols = [traj.t, traj.S, traj.I, traj.R] + ([traj.theta] if suspended else [])
    for k in range(len(traj)):
        buf.write(",".join(fmt(c[k]) for c in cols) + f",{int(traj.impulse[k])}\n")
    return buf.getvalue(), "csv"


def cmd_curves(args, params, config):
    if args.n_T < 1 or not 0 < args.T_min <= args.T_max:
        raise UsageError("need 0 < --T-min <= --T-max and --n-T >= 1")
    Ts = np.linspace(args.T_min, args.T_max, args.n_T)
    seasonal = params.gamma > 0
    endemic = params.A > params.S_c
    buf = io.StringIO()
    buf.write("T,p1,p2,p2seas\n" if seasonal else "T,p1,p2\n")
    for T in Ts:
        row = [T, cf.p1(float(T), params.A), cf.p2(float(T), params.A, params.S_c) if endemic else math.nan]
        if seasonal:
            try:
                row.append(cf.p2_seasonal(params.with_(T=float(T))))
            except ExistenceError:
                row.append(math.nan)
        buf.write(",".join(fmt(v) for v in row) + "\n")
    return buf.getvalue(), "csv"


def cmd_sweep(args, params, config):
    if args.gamma != 0:
        raise UsageError("sweep compares against analytic regions and needs --gamma 0")
    if args.jobs < 1:
        raise UsageError("--jobs must be >= 1")
    grid = SweepGrid.linspace(
        (args.T_min, args.T_max), (args.p_min, args.p_max), args.n_T, args.n_p,
        horizon_periods=args.horizon_periods, tol=args.tol, initial=(args.s0, args.i0),
        rel_tol=args.rel_tol, abs_tol=args.abs_tol,
    )
    result = sweep_bifurcation_plane(params, grid, jobs=args.jobs)
    buf = io.StringIO()
    buf.write("T,p,label_analytic,label_empirical,lyapunov,residual\n")
    for T, p, la, le_, ly, res in result.rows():
        buf.write(",".join([fmt(T), fmt(p), la, le_, fmt(ly), fmt(res)]) + "\n")
    report = {
        "agreement_outside_band": _finite_or_none(result.agreement()),
        "boundary_band": grid.boundary_band,
        "cells": len(grid.T_values) * len(grid.p_values),
        "discrepancies": result.discrepancies(),
        "overlay": result.overlay,
    }
    extra = {}
    report_path = args.report or (args.out + ".discrepancies.json" if args.out else None)
    if report_path:
        extra[report_path] = json.dumps(report, indent=2, sort_keys=True) + "\n"
    else:
        sys.stderr.write(f"agreement outside band: {report['agreement_outside_band']}\n")
    return buf.getvalue(), "csv", extra


def cmd_floquet(args, params, config):
    analytic = cf.floquet_analytic(params)
    numeric = monodromy_numeric(params, config)
    rel = [abs(n - a) / abs(a) for n, a in zip(numeric.as_tuple(), analytic.as_tuple())]
    return {
        "orbit": analytic.orbit,
        "analytic": {"lambda1": analytic.lambda1, "lambda2": analytic.lambda2},
        "numeric": {"lambda1": numeric.lambda1, "lambda2": numeric.lambda2},
        "relative_error": {"lambda1": rel[0], "lambda2": rel[1]},
        "stable": analytic.stable,
        "Rp": _finite_or_none(cf.reproduction_number_Rp(params)),
    }


def cmd_lyapunov(args, params, config):
    theta0 = 0.0 if args.theta0 is None else args.theta0
    res = lyapunov_max(params, config, (args.s0, args.i0, theta0), args.t_end, args.renorm_every, args.transient)
    tail = res.running[-min(10, res.running.size):]
    return {
        "exponent": res.exponent,
        "horizon": args.t_end,
        "renorm_every": params.T if args.renorm_every is None else args.renorm_every,
        "transient": args.transient,
        "renormalizations": int(res.times.size),
        "reseeds": res.reseeds,
        "running_tail": tail.tolist(),
        "chaotic": res.exponent > 0.02,
    }


def cmd_classify(args, params, config):
    config = IntegratorConfig(rel_tol=args.rel_tol, abs_tol=args.abs_tol, dense_output_dt=params.T)
    horizon = max(args.t_end, 50 * params.T)
    rep = classify_empirical(params, config, (args.s0, args.i0), horizon, args.tol)
    out = {"empirical": rep.to_dict()}
    out["analytic"] = cf.classify_analytic(params).value if params.gamma == 0 else None
    if args.samples > 0:
        rng = np.random.default_rng(args.seed)
        bound = trapping_bound(params)
        labels = []
        for _ in range(args.samples):
            S0 = rng.uniform(1e-3, params.A)
            I0 = rng.uniform(1e-3, max(bound - S0, 2e-3))
            r = classify_empirical(params, config, (S0, I0), horizon, args.tol, compute_lyapunov=False)
            labels.append({"S0": S0, "I0": I0, "label": r.label.value})
        out["samples"] = labels
        out["seed"] = args.seed
    return out


def cmd_endemic_orbit(args, params, config):
    orb = find_endemic_orbit(params, config)
    return {
        "S_star": orb.S_star,
        "I_star": orb.I_star,
        "mean_S": orb.mean_S,
        "S_c": params.S_c,
        "neutrality_gap": abs(orb.mean_S - params.S_c),
        "residual": orb.residual,
        "iterations": orb.iterations,
    }


COMMANDS = {
    "simulate": cmd_simulate,
    "curves": cmd_curves,
    "sweep": cmd_sweep,
    "floquet": cmd_floquet,
    "lyapunov": cmd_lyapunov,
    "classify": cmd_classify,
    "endemic-orbit": cmd_endemic_orbit,
}


# ------------------------------------------------------------------ driver


def _digest(text: str) -> str:
    return hashlib.sha256(text.encode()).hexdigest()


def _render(result, fmt_choice):
    """Normalize a command result to (main text, extra files)."""
    extra = {}
    if isinstance(result, tuple):
        text, native, *rest = result
        if rest:
            extra = rest[0]
        if fmt_choice == "json":
            raise UsageError("this command writes CSV; drop --format json")
        return text, extra
    if fmt_choice == "csv":
        raise UsageError("this command writes JSON; drop --format csv")
    return json.dumps(result, indent=2, sort_keys=True, allow_nan=False, default=float) + "\n", extra


def run(argv) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    if args.command == "replay":
        return replay(args.manifest)
    start = time.perf_counter()
    try:
        params = _params_from(args)
        config = _config_from(args)
        result = COMMANDS[args.command](args, params, config)
        text, extra = _render(result, args.format)
    except (UsageError, DomainError) as exc:
        parser.error(str(exc))
    except (IntegrationError, ConvergenceError, ExistenceError, ArithmeticError) as exc:
        diag = {"error": type(exc).__name__, "message": str(exc)}
        if isinstance(exc, IntegrationError):
            diag["diagnostics"] = exc.diagnostics
            diag["last_state"] = None if exc.last_state is None else list(map(float, exc.last_state))
        if isinstance(exc, ConvergenceError):
            diag["residual"] = exc.residual
        sys.stderr.write(json.dumps(diag, default=str) + "\n")
        return EXIT_NUMERIC
    if args.out is None:
        sys.stdout.write(text)
        return EXIT_OK
    outputs = {args.out: text, **extra}
    for path, content in outputs.items():
        Path(path).write_text(content)
    manifest = {
        "command": args.command,
        "argv": list(argv),
        "params": params.to_dict(),
        "config": config.to_dict(),
        "seed": args.seed,
        "tool_version": __version__,
        "python": platform.python_version(),
        "numpy": np.__version__,
        "duration_seconds": time.perf_counter() - start,
        "outputs": {path: _digest(content) for path, content in outputs.items()},
    }
    Path(args.out + ".manifest.json").write_text(json.dumps(manifest, indent=2, sort_keys=True) + "\n")
    return EXIT_OK


def replay(manifest_path) -> int:
    manifest = json.loads(Path(manifest_path).read_text())
    expected = manifest["outputs"]
    parser = build_parser()
    args = parser.parse_args(manifest["argv"])
    params = _params_from(args)
    config = _config_from(args)
    result = COMMANDS[args.command](args, params, config)
    text, extra = _render(result, args.format)
    produced = {args.out: text, **extra}
    mismatched = [p for p, digest in expected.items() if _digest(produced.get(p, "")) != digest]
    report = {"manifest": str(manifest_path), "match": not mismatched, "mismatched": mismatched}
    sys.stdout.write(json.dumps(report, sort_keys=True) + "\n")
    return EXIT_OK if not mismatched else EXIT_NUMERIC


def main(argv=None) -> int:
    return run(sys.argv[1:] if argv is None else argv)


if __name__ == "__main__":
    sys.exit(main())
