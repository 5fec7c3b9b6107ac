"""
Command-line entry point for predsched.

Registers one handler per sub-command and maps failures to exit codes:
0 success, 1 verification failure, 2 usage or configuration error.
"""

import argparse
import sys
from typing import List, Optional

from config import Config
from handlers.generate import generate_command
from handlers.online import online_command
from handlers.plot import plot_command
from handlers.sensitivity import sensitivity_command
from handlers.verify import verify_command
from services.verification import SUITES
from utils.logger import log_error, setup_logger

logger = setup_logger("predsched.main")


class UsageParser(argparse.ArgumentParser):
    """ArgumentParser that exits with code 2 on usage errors."""

    def error(self, message: str) -> None:
        self.print_usage(sys.stderr)
        sys.stderr.write(f"{self.prog}: error: {message}\n")
        sys.exit(2)


def _add_instance_flags(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--config", help="key = value config file (bundled name or path)")
    parser.add_argument("--dist", choices=["pareto", "exponential", "weibull"], help="Processing time distribution")
    parser.add_argument("--n", type=int, help=f"Number of jobs (default {Config.DEFAULT_N})")
    parser.add_argument("--m", type=int, help="Number of machines")
    parser.add_argument("--env", choices=["single", "identical", "unrelated"], help="Machine environment")
    parser.add_argument("--seed", type=int, help=f"Master seed (default {Config.DEFAULT_SEED})")
    parser.add_argument(
        "--weighted",
        action=argparse.BooleanOptionalAction,
        default=None,
        help="Pareto(2, 1) weights (default: on except for a single machine)",
    )
    parser.add_argument(
        "--releases",
        action=argparse.BooleanOptionalAction,
        default=None,
        help="Pareto(2, 1) release dates (default: on except for a single machine)",
    )
    parser.add_argument("--out", help="Output file")


def _add_experiment_flags(parser: argparse.ArgumentParser) -> None:
    _add_instance_flags(parser)
    parser.add_argument("--algos", help="Comma-separated policies, e.g. rr,pts or pts(wspt,wrr,0.1)")
    parser.add_argument("--lambdas", help="Comma-separated λ values for a bare 'pts'")
    parser.add_argument("--runs", type=int, help=f"Repetitions (default {Config.DEFAULT_RUNS})")
    parser.add_argument("--plot", action="store_true", help="Also write an SVG next to the CSV")


def build_parser() -> argparse.ArgumentParser:
    """Build the ``predsched`` argument parser."""
    parser = UsageParser(
        prog="predsched",
        description="Non-clairvoyant scheduling with permutation predictions",
    )
    commands = parser.add_subparsers(dest="command", required=True, parser_class=UsageParser)

    generate = commands.add_parser("generate", help="Write a random instance")
    _add_instance_flags(generate)
    generate.set_defaults(handler=generate_command)

    sensitivity = commands.add_parser("sensitivity", help="Run the noise-sensitivity experiment")
    _add_experiment_flags(sensitivity)
    sensitivity.add_argument("--omegas", help="Comma-separated noise deviations ω")
    sensitivity.set_defaults(handler=sensitivity_command)

    online = commands.add_parser("online", help="Run the online-learning experiment")
    _add_experiment_flags(online)
    online.add_argument("--gamma", type=float, help=f"Noise factor γ (default {Config.DEFAULT_GAMMA:g})")
    online.add_argument("--rounds", type=int, help=f"Rounds (default {Config.DEFAULT_ROUNDS})")
    online.set_defaults(handler=online_command)

    verify = commands.add_parser("verify", help="Run property suites")
    verify.add_argument("suite", nargs="?", default="all", choices=SUITES)
    verify.add_argument("--seed", type=int, default=0, help="Seed of the first trial")
    verify.add_argument("--scale", type=float, default=None, help="Multiplier on trial counts")
    verify.set_defaults(handler=verify_command)

    plot = commands.add_parser("plot", help="Plot an experiment CSV as SVG")
    plot.add_argument("csv", help="CSV written by sensitivity/online")
    plot.add_argument("--out", help="SVG path (default: CSV path with .svg)")
    plot.add_argument("--title", help="Figure title")
    plot.set_defaults(handler=plot_command)

    return parser


def main(argv: Optional[List[str]] = None) -> int:
    """
    Main entry point.

    Args:
        argv: Arguments without the program name (sys.argv[1:] when omitted)

    Returns:
        Process exit code
    """
    args = build_parser().parse_args(argv)
    try:
        return args.handler(args)
    except (ValueError, OSError) as e:
        log_error(logger, e, context=args.command)
        return 2
    except Exception as e:
        logger.error(f"Fatal error: {e}", exc_info=True)
        return 1


if __name__ == "__main__":
    sys.exit(main())
