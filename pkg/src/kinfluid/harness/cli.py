"""Command line: ``python -m kinfluid {run,sweep,verify,mms}``."""

from __future__ import annotations

import argparse
import json
import logging
import sys
from dataclasses import replace

from ..limit_solver import mms_study, residual_study
from .checks import verify_suite
from .config import ConfigError, RunConfig, load_config
from .runner import RunError, run_single, run_sweep, sweep_summary

DEFAULT_EPSILONS = (0.1, 0.05, 0.025, 0.0125)
MIN_SLOPE = 0.4
MIN_ORDER = 0.9


def _epsilons(text: str):
    try:
        vals = [float(t) for t in text.split(",") if t.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"not a comma-separated list of numbers: {text!r}") from None
    if not vals or any(v <= 0 for v in vals):
        raise argparse.ArgumentTypeError("epsilons must be positive")
    return vals


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", metavar="PATH", help="flat key = value run configuration")
    common.add_argument("--verbose", action="store_true", help="log progress to stderr")

    parser = argparse.ArgumentParser(
        prog="kinfluid",
        description="Kinetic-fluid simulations, epsilon sweeps and verification suites.")
    sub = parser.add_subparsers(dest="command", required=True)
    run = sub.add_parser("run", parents=[common], help="single run with entropy monitors")
    run.add_argument("--dump-f", action="store_true", help="save f at every snapshot (.npy)")
    sweep = sub.add_parser("sweep", parents=[common], help="epsilon sweep and rate fit")
    sweep.add_argument("--epsilons", type=_epsilons, default=list(DEFAULT_EPSILONS),
                       metavar="LIST", help="comma-separated, strictly decreasing")
    sweep.add_argument("--dump-f", action="store_true", help="save f at every snapshot (.npy)")
    sub.add_parser("verify", parents=[common], help="property and oracle suites")
    sub.add_parser("mms", parents=[common], help="manufactured-solution refinement study")
    return parser


def _load(args, default_outdir: str) -> RunConfig:
    if args.config:
        return load_config(args.config)
    return RunConfig(outdir=default_outdir)


def _cmd_run(args) -> int:
    cfg = replace(_load(args, "out/run"), dump_f=args.dump_f)
    art = run_single(cfg)
    rep = art.report()
    print(json.dumps(rep, indent=2))
    return 0 if rep["monitor_holds"] else 1


def _cmd_sweep(args) -> int:
    cfg = replace(_load(args, "out/sweep"), dump_f=args.dump_f)
    result = run_sweep(cfg, args.epsilons, outdir=cfg.outdir)
    summary = sweep_summary(result)
    print(json.dumps(summary, indent=2))
    print(f"fitted slope {result.fitted_slope:.4f}, constant {result.fitted_constant:.4g}")
    ok = result.re_strictly_decreasing and result.fitted_slope >= MIN_SLOPE
    return 0 if ok else 1


def _cmd_verify(args) -> int:
    results = verify_suite()
    for r in results:
        print(r.line())
    failures = [{"check": r.name, "detail": r.detail} for r in results if not r.passed]
    print(json.dumps({"failures": failures}))
    return 1 if failures else 0


def _cmd_mms(args) -> int:
    cfg = _load(args, "out/mms")
    params = cfg.params
    study = mms_study(params)
    resid = residual_study(params)
    for label, s in (("solution", study), ("residual", resid)):
        errs = ", ".join(f"{e:.4e}" for e in s.errors)
        orders = ", ".join(f"{o:.3f}" for o in s.orders)
        print(f"{label}: nx {list(s.nxs)} L1 errors [{errs}] orders [{orders}]")
    failures = [name for name, s in (("solution", study), ("residual", resid))
                if s.min_order < MIN_ORDER]
    print(json.dumps({"failures": failures}))
    return 1 if failures else 0


COMMANDS = {"run": _cmd_run, "sweep": _cmd_sweep, "verify": _cmd_verify, "mms": _cmd_mms}


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return COMMANDS[args.command](args)
    except (ConfigError, FileNotFoundError) as exc:
        print(f"kinfluid: error: {exc}", file=sys.stderr)
        return 2
    except (RunError, ValueError) as exc:
        print(f"kinfluid: {exc}", file=sys.stderr)
        return 1
