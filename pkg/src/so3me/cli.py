"""Command-line front end: ``run``, ``batch``, and ``verify`` subcommands.

Config resolution order: ``--config PATH``, then the ``SO3ME_DEFAULT_CONFIG``
environment variable, then the built-in reference scenario.
"""
from __future__ import annotations

import argparse
import json
import os
import sys
from dataclasses import asdict

from .config import (IoError, ParseError, ValidationError, config_overrides,
                     default_config, load_config)
from .harness import run_batch, run_scenario, verify_run, write_trajectory

ENV_CONFIG = "SO3ME_DEFAULT_CONFIG"


def _u64(text):
    try:
        value = int(text, 10)
    except ValueError:
        raise argparse.ArgumentTypeError(f"invalid seed {text!r}") from None
    if not 0 <= value < 2 ** 64:
        raise argparse.ArgumentTypeError(
            "seed must fit in an unsigned 64-bit integer")
    return value


def _resolve_config(path_arg):
    if path_arg:
        return load_config(path_arg)
    env_path = os.environ.get(ENV_CONFIG)
    if env_path:
        return load_config(env_path)
    return default_config()


def build_parser():
    parser = argparse.ArgumentParser(
        prog="so3me",
        description="Multi-rate attitude estimation: simulate, batch, verify.")
    sub = parser.add_subparsers(dest="command", required=True)

    run_p = sub.add_parser(
        "run", help="simulate one scenario and write its trajectory")
    run_p.add_argument("--config", metavar="PATH",
                       help="scenario config file")
    run_p.add_argument("--seed", type=_u64, metavar="U64",
                       help="override the run seed")
    run_p.add_argument("--noise", choices=("off", "rot", "add"),
                       help="override the noise mode")
    run_p.add_argument("--out", metavar="DIR",
                       help="override the output directory")
    run_p.add_argument("--plots", action="store_true",
                       help="also emit SVG charts")

    batch_p = sub.add_parser(
        "batch", help="run seeded Monte-Carlo trials and aggregate")
    batch_p.add_argument("--config", metavar="PATH")
    batch_p.add_argument("--trials", type=int, metavar="N",
                         help="trial count (default from config)")
    batch_p.add_argument("--out", metavar="DIR")

    verify_p = sub.add_parser(
        "verify", help="check the implicit-form and decrement suites")
    verify_p.add_argument("--config", metavar="PATH")
    verify_p.add_argument("--seed", type=_u64, metavar="U64")
    return parser


def _ensure_out_dir(cfg):
    os.makedirs(cfg.out_dir, exist_ok=True)
    return cfg.out_dir


def _write_json(path, payload):
    try:
        with open(path, "w", encoding="utf-8") as fh:
            json.dump(payload, fh, indent=2, sort_keys=True)
            fh.write("\n")
    except OSError as exc:
        raise IoError(f"cannot write {path!r}: {exc}") from None


def cmd_run(args):
    cfg = _resolve_config(args.config)
    overrides = {}
    if args.noise:
        overrides["noise_mode"] = args.noise
    if args.out:
        overrides["out_dir"] = args.out
    if overrides:
        cfg = config_overrides(cfg, **overrides)
    out_dir = _ensure_out_dir(cfg)
    result = run_scenario(cfg, seed=args.seed)
    summary = result.summary

    trajectory_path = os.path.join(out_dir, "trajectory.csv")
    write_trajectory(trajectory_path, result.rows)
    summary_path = os.path.join(out_dir, "summary.json")
    _write_json(summary_path, asdict(summary))

    print(f"wrote {trajectory_path} ({len(result.rows)} rows)")
    print(f"wrote {summary_path}")
    print(f"final phi [rad]: {summary.final_phi:.6e}")
    print(f"final |omega| [rad/s]: {summary.final_omega_norm:.6e}")
    print(f"settled-band max phi [rad]: {summary.max_phi_settled:.6e}")
    print(f"V range: [{summary.v_min:.6e}, {summary.v_max:.6e}]")
    print(f"decrement violations: {summary.decrement_violations}")
    print(f"wall [s]: {summary.wall_s:.3f}")
    if args.plots:
        from .plots import emit_plots
        for info in emit_plots(trajectory_path, out_dir):
            print(f"wrote {info.path}")
    return 0


def cmd_batch(args):
    cfg = _resolve_config(args.config)
    if args.out:
        cfg = config_overrides(cfg, out_dir=args.out)
    out_dir = _ensure_out_dir(cfg)
    result = run_batch(cfg, trials=args.trials)

    payload = {
        "aggregate": result.aggregate,
        "per_trial": [asdict(s) for s in result.summaries],
        "failures": result.failures,
    }
    batch_path = os.path.join(out_dir, "batch_summary.json")
    _write_json(batch_path, payload)

    agg = result.aggregate
    print(f"trials: {agg['trials']}")
    if agg["trials"]:
        print(f"settled-band max phi [rad]: {agg['band_max']:.6e}")
        print(f"settled-band median phi [rad]: {agg['band_median']:.6e}")
        print(f"median settle step: {agg['settle_median']}")
    for failure in result.failures:
        print(f"failure: {failure}", file=sys.stderr)
    print(f"wrote {batch_path}")
    return 1 if result.failures else 0


def cmd_verify(args):
    cfg = _resolve_config(args.config)
    report = verify_run(cfg, seed=args.seed)
    print(f"implicit-form residual: max {report.max_prop1_residual:.3e} "
          f"over {report.steps} steps: "
          f"{'pass' if report.prop1_pass else 'FAIL'}")
    print(f"decrement defect: max {report.max_defect:.3e}, "
          f"ratio {report.max_defect_ratio:.3f} of bound: "
          f"{'pass' if report.defect_pass else 'FAIL'}")
    print(f"verify: {'pass' if report.passed else 'FAIL'}")
    return 0 if report.passed else 1


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    handler = {"run": cmd_run, "batch": cmd_batch, "verify": cmd_verify}
    try:
        return handler[args.command](args)
    except (ParseError, ValidationError, IoError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
