#!/usr/bin/env python3
"""
rnd - Radon-Nikodym derivative estimation with Nystrom subsampling.

Usage:
    rnd estimate P.csv Q.csv [--alpha auto|star|X] [--mode nystrom|full]
    rnd evaluate --model model.json --points T.csv
    rnd convergence [--config FILE | --preset NAME]
    rnd bench [--config FILE | --preset NAME]
    rnd effdim P.csv
    rnd sample --which p|q --n N --seed S [--pair FAMILY]
    rnd presets
"""

from __future__ import annotations

import argparse
import logging
import math
import sys
from pathlib import Path
from typing import Any

import numpy as np

from . import __version__
from .capacity import capacity_profile
from .config import (
    RunConfig,
    apply_overrides,
    list_presets,
    load_preset,
    load_run_config,
    preset_description,
)
from .errors import RndError
from .estimator import evaluate
from .experiments import CsvWriter, estimate, run_bench, run_convergence
from .kernels import Sample, read_sample_csv, write_sample_csv
from .persistence import load_model, save_model
from .report import render_bench, render_convergence, write_report
from .synth import BUILTIN_PAIRS, draw

COMMANDS = ("estimate", "evaluate", "convergence", "bench", "effdim", "sample", "presets")

# Exit codes
EXIT_OK = 0
EXIT_ERROR = 1
EXIT_PARTIAL = 2


def print_header():
    """Print the CLI header."""
    print()
    print(f"  rnd v{__version__}")
    print()


def _fail(message: Any) -> int:
    print(f"Error: {message}", file=sys.stderr)
    return EXIT_ERROR


def cmd_presets() -> int:
    """List available experiment presets."""
    print_header()
    print("Available presets:")
    print()
    for name in list_presets():
        print(f"  {name:<14} {preset_description(name)}")
    print()
    print("Usage: rnd convergence --preset <name>")
    print()
    return EXIT_OK


def cmd_estimate(config: RunConfig, p_csv: Path, q_csv: Path, seed: int = 0) -> int:
    """
    Fit a model on two CSV samples and write model.json.

    Prints alpha, the subsample size, the cost ledger and max |beta| over the
    sample points.
    """
    try:
        xp = read_sample_csv(p_csv, label="p")
        xq = read_sample_csv(q_csv, label="q")
        est = estimate(config, xp, xq, plan_seed=seed)
    except (RndError, FileNotFoundError) as e:
        return _fail(e)

    out_dir = config.output_dir
    model_path = out_dir / "model.json"
    save_model(model_path, est.model)

    support = np.vstack([xp.points, xq.points])
    max_abs = float(np.max(np.abs(evaluate(est.model, support))))
    ledger = est.model.ledger

    print(f"N={xp.n} M={xq.n} d={xp.dim} mode={config.subsample.mode}")
    print(f"alpha={est.alpha!r} m={est.m} bandwidth={est.kernel.bandwidth!r}")
    print(f"kernel_evals={ledger.kernel_evals} solver_flops={ledger.solver_flops}")
    print(f"max_abs_beta={max_abs!r}")
    print(f"model={model_path}")
    return EXIT_OK


def cmd_evaluate(model_path: Path, points_csv: Path, out_dir: Path) -> int:
    """Evaluate a saved model at the rows of a CSV file."""
    try:
        model = load_model(model_path)
        points = read_sample_csv(points_csv)
        values = evaluate(model, points)
    except (RndError, FileNotFoundError) as e:
        return _fail(e)

    out_path = Path(out_dir) / "evaluate.csv"
    with CsvWriter(out_path, [f"x{k}" for k in range(points.dim)] + ["beta"]) as writer:
        for row, value in zip(points.points, values):
            record = {f"x{k}": float(v) for k, v in enumerate(row)}
            record["beta"] = float(value)
            writer.write(record)
    print(f"Evaluated {points.n} point(s) -> {out_path}")
    return EXIT_OK


def cmd_convergence(config: RunConfig) -> int:
    """Run the convergence study; exit 2 when any row failed."""
    print_header()
    out_dir = config.output_dir
    csv_path = out_dir / "convergence.csv"
    cells = len(config.grid) * len(config.seeds)
    print(f"Convergence: {len(config.grid)} size(s) x {len(config.seeds)} seed(s) = {cells} rows")

    try:
        result = run_convergence(config, csv_path=csv_path)
    except (RndError, FileNotFoundError) as e:
        return _fail(e)

    for s in result.summaries:
        median = s["median_l2p_error"]
        shown = f"{median:.6g}" if median is not None else "n/a"
        print(f"  N={s['N']:<7} M={s['M']:<7} median l2p_error={shown}")
    print()
    print(f"slope={result.slope!r} rate_exponent={result.rate_exponent!r}")
    print(f"csv={csv_path}")

    if config.report:
        path = write_report(out_dir, render_convergence(config, result))
        print(f"report={path}")

    if result.failures:
        print(f"{len(result.failures)} row(s) failed; see the error column")
        return EXIT_PARTIAL
    return EXIT_OK


def cmd_bench(config: RunConfig) -> int:
    """Run the cost benchmark; exit 2 when any row failed."""
    print_header()
    out_dir = config.output_dir
    csv_path = out_dir / "bench.csv"
    try:
        result = run_bench(config, csv_path=csv_path)
    except (RndError, FileNotFoundError) as e:
        return _fail(e)

    for r in result.records:
        status = r.error or f"total={r.total_cost} wall={r.wall_seconds:.3f}s"
        print(f"  {r.mode:<8} N={r.n:<7} m={r.m_sub:<6} {status}")
    print()
    for mode, exponent in result.exponents.items():
        print(f"{mode}_exponent={exponent!r}")
    if result.predicted_exponent is not None:
        print(f"predicted_nystrom_exponent={result.predicted_exponent!r}")
    print(f"csv={csv_path}")

    if config.report:
        path = write_report(out_dir, render_bench(config, result))
        print(f"report={path}")

    if result.failures:
        print(f"{len(result.failures)} row(s) failed; see the error column")
        return EXIT_PARTIAL
    return EXIT_OK


def cmd_effdim(config: RunConfig, p_csv: Path) -> int:
    """Write the capacity profile of a p-sample."""
    try:
        xp = read_sample_csv(p_csv, label="p")
        kernel = config.kernel.to_spec(xp.dim, xp)
        profile = capacity_profile(kernel, xp, r=config.selection.r)
    except (RndError, FileNotFoundError) as e:
        return _fail(e)

    out_path = config.output_dir / "effdim.csv"
    with CsvWriter(out_path, ["alpha", "n_eff", "n_inf", "ninf_ratio"]) as writer:
        for row in profile.rows():
            writer.write(row)
        writer.comment(f"alpha_star={profile.alpha_star!r}")

    print(f"alpha_star={profile.alpha_star!r} N={profile.n_points}")
    print(f"csv={out_path}")
    return EXIT_OK


def cmd_sample(config: RunConfig, which: str, n: int, seed: int, pair_name: str | None) -> int:
    """Export a synthetic sample as CSV."""
    pair = BUILTIN_PAIRS[pair_name]() if pair_name else config.pair
    try:
        sample: Sample = draw(pair, which, n, seed)
    except RndError as e:
        return _fail(e)
    out_path = config.output_dir / f"sample_{which}.csv"
    write_sample_csv(out_path, sample)
    print(f"Wrote {sample.n} point(s) from {pair.family}:{which} -> {out_path}")
    return EXIT_OK


def _number_or(keywords: tuple[str, ...]):
    """argparse type accepting a positive number or one of the keywords."""

    def parse(value: str) -> str:
        if value in keywords:
            return value
        try:
            number = float(value)
        except ValueError:
            raise argparse.ArgumentTypeError(f"expected a number or one of {keywords}, got '{value}'")
        if not (math.isfinite(number) and number > 0):
            raise argparse.ArgumentTypeError(f"expected a positive number, got '{value}'")
        return value

    return parse


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="rnd",
        description="Radon-Nikodym derivative estimation with Nystrom subsampling",
        formatter_class=argparse.RawDescriptionHelpFormatter,
        epilog="""
Examples:
  rnd estimate p.csv q.csv --out run1
  rnd estimate p.csv q.csv --mode full --alpha 0.01
  rnd evaluate --model run1/model.json --points t.csv --out run1
  rnd convergence --preset convergence
  rnd bench --preset bench
  rnd effdim p.csv --bandwidth median
  rnd sample --which q --n 500 --seed 3 --out data
  rnd presets
        """,
    )

    parser.add_argument("command", choices=COMMANDS, help="Subcommand to run")
    parser.add_argument("inputs", nargs="*", type=Path, help="Sample CSV file(s)")
    parser.add_argument("--config", type=Path, metavar="FILE", help="YAML run configuration")
    parser.add_argument("--preset", metavar="NAME", help="Use a packaged preset (see: rnd presets)")

    parser.add_argument("--kernel", choices=["gaussian", "laplacian", "polynomial"])
    parser.add_argument("--bandwidth", type=_number_or(("median",)), help="Number or 'median'")
    parser.add_argument("--alpha", type=_number_or(("auto", "star")), help="Number, 'auto' or 'star'")
    parser.add_argument("--s", type=float, help="Source exponent of beta, in (0, 1/2]")
    parser.add_argument("--r", type=float, help="Source exponent of the kernel sections, in [0, 1/2]")
    parser.add_argument("--delta", type=float, help="Confidence level in (0, 1)")
    parser.add_argument("--c-sub", dest="c_sub", type=float, help="Subsample size constant C")
    parser.add_argument("--regime", choices=["in_rkhs", "out_of_rkhs"])
    parser.add_argument("--subsample", help="'auto', an integer m or a fraction in (0, 1)")
    parser.add_argument("--mode", choices=["nystrom", "full"])
    parser.add_argument("--full", action="store_true", help="Shorthand for --mode full")
    parser.add_argument("--weighting", choices=["sample", "subsample"])
    parser.add_argument("--seed", type=int, help="Seed (replaces the configured seed list)")
    parser.add_argument("--out", type=Path, metavar="DIR", help="Output directory")
    parser.add_argument("--mc-points", dest="mc_points", type=int, help="Monte Carlo points")

    parser.add_argument("--model", type=Path, metavar="FILE", help="Model file for evaluate")
    parser.add_argument("--points", type=Path, metavar="CSV", help="Points file for evaluate")
    parser.add_argument("--which", choices=["p", "q"], default="p", help="Side to sample")
    parser.add_argument("--n", type=int, default=100, help="Sample size for sample")
    parser.add_argument("--pair", choices=sorted(BUILTIN_PAIRS), help="Built-in pair for sample")

    parser.add_argument("-v", "--verbose", action="store_true", help="Debug logging")
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    return parser


def _load_config(args: argparse.Namespace) -> RunConfig:
    if args.config and args.preset:
        raise RndError("Use either --config or --preset, not both")
    if args.preset:
        config = load_preset(args.preset)
    else:
        config = load_run_config(args.config)
    flags = {
        name: getattr(args, name)
        for name in (
            "kernel",
            "bandwidth",
            "alpha",
            "s",
            "r",
            "delta",
            "c_sub",
            "regime",
            "subsample",
            "mode",
            "weighting",
            "seed",
            "out",
            "mc_points",
        )
    }
    if args.full:
        flags["mode"] = "full"
    return apply_overrides(config, flags)


def main(argv: list[str] | None = None) -> int:
    """Main entry point."""
    parser = build_parser()
    args = parser.parse_args(argv)

    logging.basicConfig(
        level=logging.DEBUG if args.verbose else logging.WARNING,
        format="%(levelname)s %(name)s: %(message)s",
    )

    if args.command == "presets":
        return cmd_presets()

    if args.command == "evaluate":
        if not args.model or not args.points:
            parser.error("evaluate requires --model and --points")
        return cmd_evaluate(args.model, args.points, args.out or Path("."))

    try:
        config = _load_config(args)
    except (RndError, FileNotFoundError) as e:
        return _fail(e)

    if args.command == "estimate":
        if len(args.inputs) != 2:
            parser.error("estimate requires a p-sample CSV and a q-sample CSV")
        return cmd_estimate(config, args.inputs[0], args.inputs[1], seed=args.seed or 0)

    if args.command == "effdim":
        if len(args.inputs) != 1:
            parser.error("effdim requires one p-sample CSV")
        return cmd_effdim(config, args.inputs[0])

    if args.command == "sample":
        if args.n < 1:
            parser.error("--n must be >= 1")
        return cmd_sample(config, args.which, args.n, args.seed or 0, args.pair)

    if args.command == "convergence":
        return cmd_convergence(config)

    return cmd_bench(config)


if __name__ == "__main__":
    sys.exit(main())
