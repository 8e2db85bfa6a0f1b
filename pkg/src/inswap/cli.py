"""Command-line entry point: ``inswap sample|relax|rate --config c.json``.

Exit codes: 0 success, 2 configuration error, 3 numeric failure.
"""

from __future__ import annotations

import argparse
import json
import sys

from .errors import ConfigError, InswapError
from .harness import RateConfig, RunConfig, parse_config, run_equilibrium, run_rates, run_relaxation

EXIT_OK, EXIT_CONFIG, EXIT_NUMERIC = 0, 2, 3


def _parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="inswap", description="Tempering and infinite-swapping samplers.")
    sub = p.add_subparsers(dest="command", required=True)
    for name, text in (("sample", "equilibrium run: per-slot weighted estimates"),
                       ("relax", "relaxation study: mean slot-1 energy per move"),
                       ("rate", "large-deviation rates of a finite two-temperature chain")):
        s = sub.add_parser(name, help=text)
        s.add_argument("--config", required=True, help="JSON config file")
        s.add_argument("--seed", type=int, help="override the config seed")
        s.add_argument("--out", help="output CSV path (default: config 'output', else stdout)")
        s.add_argument("--threads", type=int, help="worker threads for replicates")
    return p


def _load(path: str) -> dict:
    try:
        with open(path) as fh:
            return json.load(fh)
    except OSError as err:
        raise ConfigError(f"cannot read config: {err}") from None
    except json.JSONDecodeError as err:
        raise ConfigError(f"config is not valid JSON: {err}") from None


def run(argv: list[str] | None = None) -> int:
    args = _parser().parse_args(argv)
    try:
        data = _load(args.config)
        if args.command == "rate":
            cfg = parse_config(data, RateConfig, seed=args.seed, output=args.out)
            report = run_rates(cfg)
        else:
            cfg = parse_config(data, RunConfig, seed=args.seed, output=args.out, threads=args.threads)
            report = run_equilibrium(cfg) if args.command == "sample" else run_relaxation(cfg)
    except ConfigError as err:
        print(f"inswap: config error: {err}", file=sys.stderr)
        return EXIT_CONFIG
    except (ArithmeticError, FloatingPointError, InswapError) as err:
        print(f"inswap: numeric failure: {err}", file=sys.stderr)
        return EXIT_NUMERIC
    if not cfg.output:
        sys.stdout.write(report.csv)
    return EXIT_OK


def main(argv: list[str] | None = None) -> None:
    sys.exit(run(argv))


if __name__ == "__main__":
    main()
