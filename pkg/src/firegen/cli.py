"""Command-line front end.

Exit codes: 0 success, 2 bad arguments or config, 3 missing inputs,
4 numerical failure during training or simulation.
"""
from __future__ import annotations

import argparse
import dataclasses
import sys

import yaml

from .errors import MissingInputError, NumericalError
from .pipeline import (cmd_ablate, cmd_bench, cmd_evaluate, cmd_generate,
                       cmd_simulate, cmd_train_surrogate, cmd_train_vqvae,
                       load_config)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="firegen",
        description="Wildfire spread simulation, generative augmentation "
                    "and surrogate forecasting experiments.")
    sub = parser.add_subparsers(dest="command", required=True)

    def add(name, help_text):
        p = sub.add_parser(name, help=help_text)
        p.add_argument("--config", required=True,
                       help="experiment config YAML")
        p.add_argument("--seed", type=int, default=None,
                       help="override master_seed")
        p.add_argument("--out", default=None, help="override output_dir")
        return p

    add("simulate", "synthesize the ecoregion and simulate all datasets")
    add("train-vqvae", "train the video autoencoder on the training set")

    p = add("generate", "sample new sequences from the trained autoencoder")
    p.add_argument("--count", type=int, default=None,
                   help="number of sequences (default: config n_generated)")
    p.add_argument("--alpha", type=float, default=None,
                   help="source/noise mixing weight (default: config alpha)")

    p = add("train-surrogate", "fit the reduced basis and latent forecaster")
    p.add_argument("--mode", choices=("baseline", "proposed"),
                   default="baseline",
                   help="training pool: simulated only, or simulated "
                        "plus generated")

    p = add("evaluate", "score trained forecasters on the test fires")
    p.add_argument("--mode", choices=("baseline", "proposed"), default=None,
                   help="evaluate one mode (default: all with checkpoints)")

    p = add("ablate", "sweep one knob and emit a metric-vs-value report")
    p.add_argument("--param", required=True,
                   choices=("alpha", "beta", "generated_count"))
    p.add_argument("--values", required=True,
                   help="comma-separated sweep values, e.g. 0.3,0.6,1.0")

    p = add("bench", "time one simulated fire against one generated fire")
    p.add_argument("--runs", type=int, default=10,
                   help="timing repetitions (default 10)")
    return parser


def _parse_values(raw: str, parameter: str) -> list:
    cast = int if parameter == "generated_count" else float
    parts = [part.strip() for part in raw.split(",") if part.strip()]
    try:
        return [cast(part) for part in parts]
    except ValueError:
        raise ValueError(f"--values must be comma-separated "
                         f"{cast.__name__}s, got {raw!r}")


def _dispatch(args: argparse.Namespace) -> None:
    config = load_config(args.config)
    if args.seed is not None:
        config = dataclasses.replace(config, master_seed=args.seed)
    if args.out is not None:
        config = dataclasses.replace(config, output_dir=args.out)

    if args.command == "simulate":
        out = cmd_simulate(config)
        for split, path in out.items():
            print(f"{split}: {path}")
    elif args.command == "train-vqvae":
        print(f"checkpoint: {cmd_train_vqvae(config)}")
    elif args.command == "generate":
        print(f"generated: {cmd_generate(config, args.count, args.alpha)}")
    elif args.command == "train-surrogate":
        print(f"checkpoint: {cmd_train_surrogate(config, args.mode)}")
    elif args.command == "evaluate":
        result = cmd_evaluate(config, mode=args.mode)
        for name, summary in result["modes"].items():
            print(f"{name}: mean relative mismatch "
                  f"{summary['mean_relative_mismatch']:.4f}, "
                  f"mean SSIM {summary['mean_ssim']:.4f} "
                  f"over {summary['n_fires']} fires")
        if "comparison" in result:
            comp = result["comparison"]
            print(f"lowest mismatch: {comp['best_mismatch']}; "
                  f"highest SSIM: {comp['best_ssim']}")
    elif args.command == "ablate":
        rows = cmd_ablate(config, args.param,
                          _parse_values(args.values, args.param))
        keys = list(rows[0].keys())
        print(",".join(keys))
        for row in rows:
            print(",".join(f"{row[k]:.6g}" if isinstance(row[k], float)
                           else str(row[k]) for k in keys))
    elif args.command == "bench":
        report = cmd_bench(config, runs=args.runs)
        print(f"grid {report['grid_size']}x{report['grid_size']}, "
              f"{report['n_snapshots']} snapshots, {report['runs']} runs")
        print(f"simulate: {report['ca_mean_s']:.4f} s "
              f"(std {report['ca_std_s']:.4f})")
        print(f"generate: {report['generate_mean_s']:.4f} s "
              f"(std {report['generate_std_s']:.4f})")
        print(f"speed-up: {report['speedup_ratio']:.1f}x")


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        _dispatch(args)
    except NumericalError as exc:
        print(f"firegen: numerical failure: {exc}", file=sys.stderr)
        return 4
    except (MissingInputError, FileNotFoundError) as exc:
        print(f"firegen: missing input: {exc}", file=sys.stderr)
        return 3
    except (ValueError, yaml.YAMLError) as exc:
        print(f"firegen: {exc}", file=sys.stderr)
        return 2
    return 0


if __name__ == "__main__":
    sys.exit(main())
