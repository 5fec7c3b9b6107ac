"""
Verify command handler.

Runs the property suites and prints one row per check.
"""

import argparse
import sys

from services.verification import run_suite
from utils.formatters import format_check_table
from utils.logger import log_command, setup_logger

logger = setup_logger("handlers.verify")


def verify_command(args: argparse.Namespace) -> int:
    """
    Handle ``predsched verify``.

    Args:
        args: Parsed command-line arguments

    Returns:
        0 if every check passed, 1 otherwise
    """
    log_command(logger, "verify", f"suite={args.suite}, seed={args.seed}")
    results = run_suite(args.suite, seed=args.seed, scale=args.scale)
    sys.stdout.write(format_check_table(results))

    failed = [result for result in results if not result.passed]
    if failed:
        first = failed[0]
        logger.error(
            f"{len(failed)} check(s) failed; reproduce {first.suite}/{first.name} "
            f"with seed {first.first_failure_seed}"
        )
        return 1

    logger.info(f"All {len(results)} checks passed")
    return 0
