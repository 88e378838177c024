"""Command line front end: ``polymerlab <experiment> --config FILE [...]``.

Exit codes: 0 all declared checks passed, 1 some check failed,
2 unknown experiment, 3 invalid config/parameters, 4 unwritable output.
"""

from __future__ import annotations

import argparse
import json
import sys

from .harness import EXPERIMENTS, ConfigError, ExperimentConfig, run_experiment

EXIT_OK = 0
EXIT_CHECK_FAILED = 1
EXIT_UNKNOWN_EXPERIMENT = 2
EXIT_BAD_CONFIG = 3
EXIT_UNWRITABLE = 4


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="polymerlab",
        description="Directed-polymer numerical experiments (CSV + JSON reports)",
    )
    parser.add_argument("experiment", help="registered experiment name, or 'list'")
    parser.add_argument("--config", help="JSON config file", default=None)
    parser.add_argument("--seed", type=int, default=None, help="master seed override")
    parser.add_argument("--replicas", type=int, default=None)
    parser.add_argument("--workers", type=int, default=None)
    parser.add_argument("--out", default=None, help="output directory")
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    if args.experiment == "list":
        for name in sorted(EXPERIMENTS):
            print(name)
        return EXIT_OK
    if args.experiment not in EXPERIMENTS:
        print(f"unknown experiment: {args.experiment}", file=sys.stderr)
        return EXIT_UNKNOWN_EXPERIMENT
    try:
        if args.config:
            cfg = ExperimentConfig.from_json(args.config)
            if cfg.experiment and cfg.experiment != args.experiment:
                print("config names a different experiment", file=sys.stderr)
                return EXIT_BAD_CONFIG
            cfg = ExperimentConfig(
                experiment=args.experiment,
                seed=cfg.seed if args.seed is None else args.seed,
                replicas=cfg.replicas if args.replicas is None else args.replicas,
                out_dir=cfg.out_dir if args.out is None else args.out,
                workers=cfg.workers if args.workers is None else args.workers,
                params=cfg.params,
                tolerances=cfg.tolerances,
            )
        else:
            cfg = ExperimentConfig(
                experiment=args.experiment,
                seed=args.seed or 0,
                replicas=args.replicas or 1,
                out_dir=args.out or ".",
                workers=args.workers or 1,
            )
    except (OSError, json.JSONDecodeError) as exc:
        print(f"cannot read config: {exc}", file=sys.stderr)
        return EXIT_BAD_CONFIG
    try:
        report = run_experiment(cfg)
    except (ConfigError, ValueError) as exc:
        print(f"invalid parameters: {exc}", file=sys.stderr)
        return EXIT_BAD_CONFIG
    except OSError as exc:
        print(f"cannot write outputs: {exc}", file=sys.stderr)
        return EXIT_UNWRITABLE
    for name, ok in report.checks.items():
        print(f"[{'PASS' if ok else 'FAIL'}] {report.experiment}: {name}")
    print(json.dumps(report.summary, indent=2, sort_keys=True, default=str))
    return EXIT_OK if report.passed else EXIT_CHECK_FAILED


if __name__ == "__main__":
    sys.exit(main())
