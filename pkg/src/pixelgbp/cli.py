"""Command-line harness: generate data, run experiments, sweep, plot.

Configs come from a JSON file, individual flag overrides, or the built-in
study defaults, in that order of precedence (flags win).  Exit codes: 0 on
success, 1 for anything wrong with the configuration, 2 for failures during
execution.
"""

from __future__ import annotations

import argparse
import dataclasses
import json
import os
import sys
from pathlib import Path

from .experiment import (
    ExperimentConfig,
    run_experiment,
    scene_for_run,
    sweep_parameter,
    validate_sweep_field,
)
from .plots import plot_error_curves

OUTPUT_DIR_ENV = "PIXELGBP_OUTPUT_DIR"

_CONFIG_FLAGS = [
    ("--topology", str, "graph layout: flat or sharded"),
    ("--size", int, "image side length in pixels"),
    ("--sigma-p", float, "prior noise scale"),
    ("--sigma-d", float, "photometric noise scale"),
    ("--sigma-r", float, "regularization noise scale"),
    ("--iterations", int, "solver iterations per run"),
    ("--runs", int, "number of seeded runs"),
    ("--seed", int, "base seed for the run family"),
    ("--fov-degrees", float, "camera field of view"),
    ("--max-angle-degrees", float, "upper bound on the true rotation"),
    ("--noise-sigma", float, "image noise standard deviation"),
    ("--damping", float, "message damping in [0, 1)"),
    ("--step-size", float, "centralized gradient-descent step"),
    ("--pano-seed", int, "procedural panorama seed"),
]


def _add_config_flags(sub):
    sub.add_argument("--config", help="JSON config file")
    for flag, typ, desc in _CONFIG_FLAGS:
        sub.add_argument(flag, type=typ, default=None, help=desc)
    sub.add_argument("--centralized", action="store_const", const=True,
                     default=None, dest="run_centralized",
                     help="also run the centralized baseline")
    sub.add_argument("--output-dir", default=None,
                     help=f"output directory (default: ${OUTPUT_DIR_ENV})")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="pixelgbp",
        description="Distributed rotation estimation experiments.",
    )
    subs = parser.add_subparsers(dest="command", required=True)

    gen = subs.add_parser("generate", help="emit seeded scene pairs to disk")
    _add_config_flags(gen)

    run = subs.add_parser("run", help="run one experiment")
    _add_config_flags(run)

    swp = subs.add_parser("sweep", help="run one experiment per parameter value")
    _add_config_flags(swp)
    swp.add_argument("--param", required=True, help="config field to vary")
    swp.add_argument("--values", required=True,
                     help="comma-separated values for the field")

    plt = subs.add_parser("plot", help="render metric CSVs as SVG curves")
    plt.add_argument("csvs", nargs="+", help="metric CSV files")
    plt.add_argument("--out", default=None, help="output SVG path")
    plt.add_argument("--metric", default="normalized_error",
                     help="row field to plot")
    plt.add_argument("--title", default="", help="plot title")
    return parser


def _resolve_config(args) -> ExperimentConfig:
    if args.config:
        config = ExperimentConfig.from_json(Path(args.config).read_text())
    else:
        config = ExperimentConfig.standard(args.topology or "flat")
    overrides = {}
    for flag, _, _ in _CONFIG_FLAGS:
        name = flag.lstrip("-").replace("-", "_")
        value = getattr(args, name)
        if value is not None:
            overrides[name] = value
    if args.run_centralized is not None:
        overrides["run_centralized"] = args.run_centralized
    out = args.output_dir
    if out is None and not args.config:
        out = os.environ.get(OUTPUT_DIR_ENV)
    if out is not None:
        overrides["output_dir"] = out
    if overrides:
        config = dataclasses.replace(config, **overrides)
    return config


def _field_caster(name):
    for field in dataclasses.fields(ExperimentConfig):
        if field.name == name:
            return int if field.type == "int" else float
    return float


def _cmd_generate(config) -> int:
    out = Path(config.output_dir)
    for run in range(config.runs):
        scene_for_run(config, run).save(out / f"pair_{run:03d}")
    print(f"wrote {config.runs} scene pairs to {out}")
    return 0


def _cmd_run(config) -> int:
    result = run_experiment(config)
    print(json.dumps(result.summary, indent=2, sort_keys=True))
    if result.csv_path is not None:
        print(f"wrote {result.csv_path}")
    return 0


def _cmd_sweep(config, param, values) -> int:
    results = sweep_parameter(config, param, values)
    report = {
        str(value): result.summary for value, result in results.items()
    }
    print(json.dumps(report, indent=2, sort_keys=True))
    for result in results.values():
        if result.csv_path is not None:
            print(f"wrote {result.csv_path}")
    return 0


def _cmd_plot(args) -> int:
    out = args.out
    if out is None:
        base = os.environ.get(OUTPUT_DIR_ENV, ".")
        out = Path(base) / "curves.svg"
    path = plot_error_curves(args.csvs, out, metric=args.metric, title=args.title)
    print(f"wrote {path}")
    return 0


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return 0 if exc.code in (0, None) else 1

    try:
        if args.command == "plot":
            work = lambda: _cmd_plot(args)
        else:
            config = _resolve_config(args)
            if args.command == "generate":
                if not config.output_dir:
                    raise ValueError("generate requires an output directory")
                work = lambda: _cmd_generate(config)
            elif args.command == "run":
                work = lambda: _cmd_run(config)
            else:
                # value parsing and field lookup are configuration, not execution
                validate_sweep_field(args.param)
                cast = _field_caster(args.param)
                values = [cast(v) for v in args.values.split(",") if v]
                if not values:
                    raise ValueError("--values must list at least one value")
                work = lambda: _cmd_sweep(config, args.param, values)
    except (ValueError, TypeError, KeyError, OSError, json.JSONDecodeError) as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 1

    try:
        return work()
    except Exception as exc:  # noqa: BLE001 - the boundary of the program
        print(f"runtime failure: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
