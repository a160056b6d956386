"""Command line entry point: ``prion-dynamics {equilibria,simulate,spectral,verify}``."""

from __future__ import annotations

import argparse
import sys
from dataclasses import replace
from pathlib import Path

from . import spectral as sp
from .config import SOLVERS, load_config, validate_config
from .errors import ParseError, PrionModelError, ValidationError
from .io import dumps, write_json
from .model import (DISEASE, Threshold, derive_constants, disease_equilibrium_ode, threshold_classify)
from .runner import EXIT_OK, EXIT_SOLVER, EXIT_VALIDATION, EXIT_VERIFY, run_scenario
from .verify import verify_suite


def _load(args):
    if args.config is None:
        raise ValidationError("--config is required for this command", field="config")
    cfg = load_config(args.config)
    changes = {}
    if getattr(args, "out", None):
        changes["out"] = args.out
    if getattr(args, "solver", None):
        changes["solvers"] = SOLVERS if args.solver == "all" else (args.solver,)
    return validate_config(replace(cfg, **changes)) if changes else cfg


def _emit(payload, out_dir, name):
    text = dumps(payload)
    sys.stdout.write(text)
    if out_dir:
        write_json(Path(out_dir) / name, payload)


def cmd_equilibria(args):
    cfg = _load(args)
    p = cfg.params
    cls = threshold_classify(p)
    payload = {
        "params": p.as_dict(),
        "mu0": p.mu0,
        "R": p.R,
        "threshold": cls.value,
        "disease_free": {"U": 0.0, "V": p.lam / p.gamma, "P": 0.0},
    }
    if cls is Threshold.SUPERCRITICAL:
        payload["disease"] = disease_equilibrium_ode(p)._asdict()
    _emit(payload, args.out, "equilibria.json")
    return EXIT_OK


def cmd_simulate(args):
    cfg = _load(args)
    result = run_scenario(cfg)
    stream = sys.stdout if result.status == EXIT_OK else sys.stderr
    print(f"{result.message}; output in {result.out_dir}", file=stream)
    return result.status


def cmd_spectral(args):
    cfg = _load(args)
    p = cfg.params
    regime = cfg.resolved_regime
    dc = derive_constants(p, regime)
    ctx = sp.OperatorContext.from_params(p, regime, n=cfg.n, span=cfg.grid.length)
    payload = {
        "regime": regime,
        "omega": ctx.omega,
        "mu0": ctx.mu0,
        "a": ctx.a,
        "is_disease_context": ctx.is_disease,
        "growth_bound": sp.growth_bound(ctx),
        "admissible_a": [dc.omega_inf / dc.mu0, dc.mu0 / p.beta],
    }
    if ctx.is_disease:
        e = sp.kernel_e(ctx)
        payload["kernel_residual"] = ctx.norm(sp.apply_L(ctx, e.density, e.derivative_density))
        payload["kernel_normalization"] = e.normalization
        u0 = cfg.initial_density().to_shifted(p.x0)
        payload["projection_coefficient"] = ctx.functional(u0) / e.normalization
    _emit(payload, args.out, "spectral.json")
    return EXIT_OK


def cmd_verify(args):
    def progress(check):
        print(f"[{check.status.upper():6s}] {check.name}: measured {check.measured:.6g} "
              f"bound {check.bound:.6g} ({check.runtime:.1f} s)", file=sys.stderr, flush=True)

    report = verify_suite(args.level, progress=progress)
    out = Path(args.out or ".")
    write_json(out / f"verify_{args.level}.json", report.as_dict())
    print(f"overall: {report.status} ({report.runtime:.1f} s); report in {out / f'verify_{args.level}.json'}")
    return EXIT_OK if report.status == "pass" else EXIT_VERIFY


def build_parser():
    parser = argparse.ArgumentParser(prog="prion-dynamics",
                                     description="Prion polymerization-fragmentation model toolkit")
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p, solver=False):
        p.add_argument("--config", metavar="PATH", help="scenario file (key = value lines)")
        p.add_argument("--out", metavar="DIR", help="output directory")
        if solver:
            p.add_argument("--solver", choices=SOLVERS + ("all",), help="override the solvers key")
        return p

    common(sub.add_parser("equilibria", help="threshold ratio and closed-form equilibria"))
    common(sub.add_parser("simulate", help="run the configured solvers and write CSV/JSON"), solver=True)
    common(sub.add_parser("spectral", help="operator checks for the configured constants"))
    v = sub.add_parser("verify", help="run the acceptance suite")
    v.add_argument("--level", choices=("quick", "full"), default="quick")
    v.add_argument("--out", metavar="DIR", help="directory for the JSON report")
    return parser


COMMANDS = {"equilibria": cmd_equilibria, "simulate": cmd_simulate, "spectral": cmd_spectral,
            "verify": cmd_verify}


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return COMMANDS[args.command](args)
    except (ParseError, ValidationError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_VALIDATION
    except PrionModelError as exc:
        print(f"solver failure: {exc}", file=sys.stderr)
        return EXIT_SOLVER


if __name__ == "__main__":
    sys.exit(main())
