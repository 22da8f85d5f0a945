"""Command-line front end.

Subcommands map one-to-one onto the experiment drivers plus the
verification battery and a density-grid dump for contour plotting.
Settings resolve in three layers: built-in defaults, then a JSON config
file, then explicit flags.
"""
from __future__ import annotations

import argparse
import csv
import json
import sys

import numpy as np

from .checks import run_all
from .experiments import (
    RunConfig,
    benchmark_target,
    density_grid,
    run_exp1,
    run_exp2,
    run_exp3,
    run_exp4,
)
from .gaussians import ContaminatedMixture, DiagonalGaussian

_EXPERIMENTS = {"exp1": run_exp1, "exp2": run_exp2, "exp3": run_exp3,
                "exp4": run_exp4}

_CONFIG_KEYS = ("seed", "iterations", "batch_size", "learning_rate",
                "tau_grid", "trials", "outlier_weights", "out_dir",
                "dump_loss")


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="srfe-lab",
        description="Train and evaluate the interpolated-divergence "
                    "benchmark suite, or verify its numerical claims.")
    sub = parser.add_subparsers(dest="command", required=True)

    for name, blurb in (
        ("exp1", "objective comparison on the three-mode target"),
        ("exp2", "interpolation-weight sweep with repeated trials"),
        ("exp3", "weight-schedule comparison"),
        ("exp4", "contamination robustness sweep"),
    ):
        sp = sub.add_parser(name, help=blurb)
        sp.add_argument("--seed", type=int, help="base seed (default 0)")
        sp.add_argument("--out", help="output directory (default 'results')")
        sp.add_argument("--config", help="JSON file with setting overrides")
        sp.add_argument("--dump-loss", action="store_true", default=None,
                        help="also write per-cell loss histories")

    vp = sub.add_parser("verify", help="run the numerical verification suite")
    vp.add_argument("--json", dest="json_path",
                    help="write the report array to this file")
    vp.add_argument("--seed", type=int, default=0)
    vp.add_argument("--inject-failure", action="store_true",
                    help="negative control: add a check that must fail")

    dp = sub.add_parser("density-grid",
                        help="dump exact log densities on a grid")
    dp.add_argument("--target", choices=("mixture", "model"), required=True)
    dp.add_argument("--bounds", required=True,
                    help="x_low,x_high,y_low,y_high")
    dp.add_argument("--res", type=int, required=True,
                    help="grid points per axis (>= 2)")
    dp.add_argument("--outlier-weight", type=float, default=0.0,
                    help="contaminate the mixture with this box mass")
    dp.add_argument("--mu", default="0,0",
                    help="model mean, comma separated (target=model)")
    dp.add_argument("--log-sigma", default="0,0",
                    help="model log scales, comma separated (target=model)")
    dp.add_argument("--out", default="-",
                    help="CSV path, '-' for stdout (default)")
    return parser


def _parse_floats(text: str, expect: int, what: str) -> tuple[float, ...]:
    parts = text.split(",")
    if len(parts) != expect:
        raise SystemExit(f"srfe-lab: {what} needs {expect} comma-separated "
                         f"values, got {text!r}")
    try:
        return tuple(float(p) for p in parts)
    except ValueError:
        raise SystemExit(f"srfe-lab: could not parse {what}: {text!r}")


def _merge_config(args: argparse.Namespace) -> RunConfig:
    merged: dict = {}
    if args.config:
        with open(args.config, encoding="utf-8") as fh:
            loaded = json.load(fh)
        unknown = set(loaded) - set(_CONFIG_KEYS)
        if unknown:
            raise SystemExit(f"srfe-lab: unknown config keys: {sorted(unknown)}")
        merged.update(loaded)
    if args.seed is not None:
        merged["seed"] = args.seed
    if args.out is not None:
        merged["out_dir"] = args.out
    if args.dump_loss is not None:
        merged["dump_loss"] = args.dump_loss
    for key in ("tau_grid", "outlier_weights"):
        if key in merged and merged[key] is not None:
            merged[key] = tuple(float(v) for v in merged[key])
    return RunConfig(**merged)


def _cmd_experiment(args: argparse.Namespace) -> int:
    cfg = _merge_config(args)
    result = _EXPERIMENTS[args.command](cfg)
    failed = [r for r in result.rows if r.metrics.mode_coverage < 0]
    for row in failed:
        print(f"warning: cell {row.method} tau={row.tau} "
              f"weight={row.outlier_weight} failed to train",
              file=sys.stderr)
    print(f"{args.command}: wrote {len(result.rows)} rows to {cfg.out_dir}/")
    return 1 if failed else 0


def _cmd_verify(args: argparse.Namespace) -> int:
    reports = run_all(seed=args.seed, inject_failure=args.inject_failure)
    width = max(len(r.name) for r in reports)
    for r in reports:
        flag = "PASS" if r.passed else "FAIL"
        print(f"{flag}  {r.name:<{width}}  {r.details}")
    if args.json_path:
        with open(args.json_path, "w", encoding="utf-8") as fh:
            json.dump([r.to_dict() for r in reports], fh, indent=2)
        print(f"report written to {args.json_path}")
    n_bad = sum(not r.passed for r in reports)
    print(f"{len(reports) - n_bad}/{len(reports)} checks passed")
    return 0 if n_bad == 0 else 1


def _cmd_density_grid(args: argparse.Namespace) -> int:
    bounds = _parse_floats(args.bounds, 4, "--bounds")
    if args.target == "mixture":
        dist = benchmark_target()
        if args.outlier_weight > 0:
            dist = ContaminatedMixture(base=dist,
                                       outlier_weight=args.outlier_weight)
    else:
        mu = np.array(_parse_floats(args.mu, 2, "--mu"))
        log_sigma = np.array(_parse_floats(args.log_sigma, 2, "--log-sigma"))
        dist = DiagonalGaussian(mu, log_sigma)
    try:
        grid = density_grid(dist, bounds, args.res)
    except ValueError as exc:
        raise SystemExit(f"srfe-lab: {exc}")

    out = sys.stdout if args.out == "-" else open(args.out, "w", newline="",
                                                  encoding="utf-8")
    try:
        writer = csv.writer(out)
        writer.writerow(("x", "y", "log_density"))
        for x, y, ld in grid:
            writer.writerow((format(x, ".17g"), format(y, ".17g"),
                             format(ld, ".17g")))
    finally:
        if out is not sys.stdout:
            out.close()
    return 0


def main(argv=None) -> int:
    args = _build_parser().parse_args(argv)
    if args.command in _EXPERIMENTS:
        return _cmd_experiment(args)
    if args.command == "verify":
        return _cmd_verify(args)
    return _cmd_density_grid(args)


if __name__ == "__main__":
    sys.exit(main())
