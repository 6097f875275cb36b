# ABOUTME: Command-line entry point for mvpreg.
# ABOUTME: Parses subcommand flags, configures logging and maps failures to exit codes.

import argparse
import logging
import sys

from pydantic import ValidationError

from mvpreg import __version__
from mvpreg.cli.commands import run_command
from mvpreg.config import load_config
from mvpreg.errors import EXIT_CONFIG, EXIT_OK, ConfigError, MvpregError

logger = logging.getLogger(__name__)

LOG_FORMAT = "%(asctime)s %(levelname)s %(name)s: %(message)s"

# Flags whose values are lists on the command line but comma-joined strings in the config.
_LIST_FLAGS = ("stocks", "indices")


def _shared_flags(parser: argparse.ArgumentParser) -> None:
    group = parser.add_argument_group("shared")
    group.add_argument("--seed", type=int)
    group.add_argument("--restarts", type=int)
    group.add_argument("--max-iters", type=int)
    group.add_argument("--grad-tol", type=float)
    group.add_argument("--kernel", choices=["se", "seard"])
    group.add_argument("--model", choices=["mvgp", "mvtp", "gp", "tp"])
    group.add_argument("--families", help="comma-separated model families to compare")
    group.add_argument("--workers", type=int)
    group.add_argument("--config", help="flat key=value config file")
    group.add_argument("--out", help="report directory")


def build_parser() -> argparse.ArgumentParser:
    """Build the argparse parser with one subparser per command."""
    parser = argparse.ArgumentParser(
        prog="mvpreg", description="Multivariate Gaussian and Student-t process regression experiments"
    )
    parser.add_argument("--version", action="version", version=f"mvpreg {__version__}")
    parser.add_argument("--log-level", default=None, help="DEBUG, INFO, WARNING or ERROR")
    sub = parser.add_subparsers(dest="command", required=True)

    simulate = sub.add_parser("simulate", help="simulated two-output comparison study")
    _shared_flags(simulate)
    simulate.add_argument("--repetitions", type=int)
    simulate.add_argument("--noise", choices=["mgp", "mtp", "both"])
    simulate.add_argument("--bands", action="store_true", default=None)
    simulate.add_argument("--retry-budget", type=int)

    fit = sub.add_parser("fit", help="fit a model on a training CSV")
    _shared_flags(fit)
    fit.add_argument("--train")
    fit.add_argument("--inputs")
    fit.add_argument("--outputs")
    fit.add_argument("--manifest")
    fit.add_argument("--model-file")
    fit.add_argument("--drop-incomplete", action="store_true", default=None)

    predict = sub.add_parser("predict", help="predict a test CSV with a saved model")
    _shared_flags(predict)
    predict.add_argument("--model-file")
    predict.add_argument("--test")
    predict.add_argument("--drop-incomplete", action="store_true", default=None)

    crossval = sub.add_parser("crossval", help="k-fold comparison on a tabular dataset")
    _shared_flags(crossval)
    crossval.add_argument("--data")
    crossval.add_argument("--manifest")
    crossval.add_argument("--inputs")
    crossval.add_argument("--outputs")
    crossval.add_argument("--folds", type=int)
    crossval.add_argument("--drop-incomplete", action="store_true", default=None)

    backtest = sub.add_parser("backtest", help="sliding-window trading backtest")
    _shared_flags(backtest)
    backtest.add_argument("--stocks", nargs="+")
    backtest.add_argument("--indices", nargs="+")
    backtest.add_argument("--train-len", type=int)
    backtest.add_argument("--horizon", type=int)
    backtest.add_argument("--windows", type=int)
    backtest.add_argument("--fee", type=float)
    backtest.add_argument("--initial", type=float)
    backtest.add_argument("--no-standardize", dest="standardize", action="store_false", default=None)

    return parser


def _set_log_level(level: str) -> None:
    try:
        logging.getLogger().setLevel(level.upper())
    except ValueError:
        raise ConfigError(f"Unknown log level '{level}'") from None


def _overrides(args: argparse.Namespace) -> dict:
    values = {k: v for k, v in vars(args).items() if k != "command" and v is not None}
    for key in _LIST_FLAGS:
        if key in values:
            values[key] = ",".join(values[key])
    return values


def main(argv: list[str] | None = None) -> int:
    """Run one mvpreg command.

    Returns:
        Process exit code: 0 on success, 2 for configuration errors, 3 for
        data errors and 4 for numerical failures.
    """
    args = build_parser().parse_args(argv)
    overrides = _overrides(args)
    logging.basicConfig(level=logging.INFO, format=LOG_FORMAT, force=True)

    try:
        config = load_config(overrides.get("config"), overrides)
        _set_log_level(config.log_level)
        paths = run_command(args.command, config)
    except MvpregError as e:
        logger.error("%s", e)
        return e.exit_code
    except ValidationError as e:
        logger.error("Invalid value: %s", e)
        return EXIT_CONFIG

    for path in paths:
        logger.info("Report: %s", path)
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
