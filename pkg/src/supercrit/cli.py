"""Command line entry point.

Subcommands mirror the experiment kinds plus ``export``. Exit codes:
0 ok, 2 config error, 3 numerical abort, 4 invariant violation.

Any config key can be overridden from the environment with the SUPERCRIT_
prefix, e.g. SUPERCRIT_SEED=7.
"""

from __future__ import annotations

import argparse
import os
import sys

from .config import (
    ConfigError,
    ExperimentConfig,
    parse_config,
    validate,
)
from .field_core import AmplitudeError
from .runner import EXIT_FOR_OUTCOME, export_plot_data, run_experiment
from .wave_integrator import BlowUpError

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_NUMERICAL = 3
EXIT_INVARIANT = 4

ENV_PREFIX = "SUPERCRIT_"

_KIND_COMMANDS = (
    "check-assumptions",
    "simulate-wave",
    "simulate-nls",
    "weak-strong",
    "appendix-construct",
    "identity-check",
)


def _env_overrides() -> dict:
    out = {}
    for key, value in os.environ.items():
        if key.startswith(ENV_PREFIX):
            out[key[len(ENV_PREFIX):].lower()] = value
    return out


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="supercrit",
        description="Numerical laboratory for supercritical wave and NLS dynamics.",
    )
    sub = parser.add_subparsers(dest="command", required=True)
    for name in _KIND_COMMANDS:
        p = sub.add_parser(name, help=f"run a {name} experiment")
        p.add_argument("--config", required=True, help="key=value config file")
        p.add_argument("--output", default="runs", help="output directory")
        p.add_argument("--seed", type=int, default=None, help="override seed")
        p.add_argument("--jobs", type=int, default=1, help="parallel ladder members")
    p = sub.add_parser("export", help="emit tidy plot CSV for an experiment")
    p.add_argument("experiment_id")
    p.add_argument("--output", default="runs", help="output directory")
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)

    if args.command == "export":
        try:
            sys.stdout.write(export_plot_data(args.experiment_id, args.output))
        except FileNotFoundError as exc:
            print(f"error: {exc}", file=sys.stderr)
            return EXIT_CONFIG
        return EXIT_OK

    try:
        with open(args.config) as fh:
            text = fh.read()
    except OSError as exc:
        print(f"error: cannot read config: {exc}", file=sys.stderr)
        return EXIT_CONFIG

    env = _env_overrides()
    if env:
        text = text + "\n" + "\n".join(f"{k} = {v}" for k, v in sorted(env.items()))
    try:
        cfg = parse_config(text, kind=args.command)
        if args.seed is not None:
            from dataclasses import replace

            cfg = replace(cfg, seed=args.seed)
            errs = validate(cfg)
            if errs:
                raise ConfigError(errs)
    except ConfigError as exc:
        for err in exc.errors:
            print(f"config error: {err}", file=sys.stderr)
        return EXIT_CONFIG

    try:
        manifest = run_experiment(cfg, args.output, jobs=args.jobs)
    except (BlowUpError, AmplitudeError) as exc:
        print(f"numerical abort: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL
    print(f"{manifest.experiment_id} {manifest.outcome}")
    return EXIT_FOR_OUTCOME[manifest.outcome]


if __name__ == "__main__":
    raise SystemExit(main())
