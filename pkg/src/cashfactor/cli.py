"""Command-line entry point.

Commands: ingest, signal, backtest, optimize, report. Every command takes
--config pointing at a flat key = value file; flags override file values.
Exit codes: 0 success, 2 config error, 3 data/schema error, 4 numerical
failure. Set CASHFACTOR_LOG to control log verbosity.
"""
from __future__ import annotations

import argparse
import logging
import os
import sys

from .config import RunConfig, parse_config_file
from .errors import ConfigError, DataError, NumericalError
from .pipeline import run_backtest_cmd, run_ingest, run_optimize, run_report, run_signal

logger = logging.getLogger(__name__)

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_DATA = 3
EXIT_NUMERICAL = 4


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="cashfactor",
        description="Cash-productivity signal backtesting pipeline.",
        epilog="Config file keys and defaults are documented in README.md; "
               "any flag below overrides the corresponding config key.")
    parser.add_argument("command", choices=["ingest", "signal", "backtest", "optimize", "report"],
                        help="pipeline stage to run")
    parser.add_argument("--config", required=True, help="path to the key = value config file")
    parser.add_argument("--lookback", help="fixed lookback months N, or 'optimize'")
    parser.add_argument("--train-start", help="training period start (ISO date)")
    parser.add_argument("--train-end", help="training period end (ISO date)")
    parser.add_argument("--test-start", help="test period start (ISO date)")
    parser.add_argument("--test-end", help="test period end (ISO date)")
    parser.add_argument("--winsor", help="winsorization percentiles as LOW,HIGH")
    parser.add_argument("--out", help="output directory")
    parser.add_argument("--universe", choices=["nasdaq", "handpicked"], help="universe mode")
    return parser


def config_from_args(args) -> RunConfig:
    values = parse_config_file(args.config)
    overrides = {
        "backtest.lookback": args.lookback,
        "backtest.train_start": args.train_start,
        "backtest.train_end": args.train_end,
        "backtest.test_start": args.test_start,
        "backtest.test_end": args.test_end,
        "output.dir": args.out,
        "universe.mode": args.universe,
    }
    if args.winsor:
        try:
            low, high = args.winsor.split(",")
            overrides["signal.winsor_low"] = low.strip()
            overrides["signal.winsor_high"] = high.strip()
        except ValueError as exc:
            raise ConfigError(f"--winsor expects LOW,HIGH, got {args.winsor!r}") from exc
    values.update({k: v for k, v in overrides.items() if v is not None})
    config = RunConfig.from_mapping(values)
    config.validate()
    return config


def _setup_logging() -> None:
    level = os.environ.get("CASHFACTOR_LOG", "INFO").upper()
    logging.basicConfig(level=getattr(logging, level, logging.INFO),
                        format="%(levelname)s %(name)s: %(message)s")


COMMANDS = {
    "ingest": run_ingest,
    "signal": run_signal,
    "backtest": run_backtest_cmd,
    "optimize": run_optimize,
    "report": run_report,
}


def main(argv=None) -> int:
    _setup_logging()
    args = build_parser().parse_args(argv)
    try:
        config = config_from_args(args)
        COMMANDS[args.command](config)
    except ConfigError as exc:
        logger.error("config error: %s", exc)
        return EXIT_CONFIG
    except DataError as exc:
        logger.error("data error: %s", exc)
        return EXIT_DATA
    except NumericalError as exc:
        logger.error("numerical failure: %s", exc)
        return EXIT_NUMERICAL
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
