"""
Plot command handler.

Turns an experiment CSV into an SVG chart of mean ratios with confidence bands.
"""

import argparse
from pathlib import Path

import pandas as pd

from services.experiments import CSV_COLUMNS, summarize
from utils.logger import log_command, log_error, setup_logger
from utils.plotting import plot_ratios

logger = setup_logger("handlers.plot")


def plot_command(args: argparse.Namespace) -> int:
    """
    Handle ``predsched plot <csv>``.

    Args:
        args: Parsed command-line arguments

    Returns:
        Process exit code
    """
    source = Path(args.csv)
    target = Path(args.out) if args.out else source.with_suffix(".svg")
    log_command(logger, "plot", f"{source} -> {target}")

    try:
        frame = pd.read_csv(source)
    except (OSError, pd.errors.ParserError, pd.errors.EmptyDataError) as e:
        log_error(logger, e, context=str(source))
        return 2

    missing = [column for column in CSV_COLUMNS if column not in frame.columns]
    if missing:
        logger.error(f"{source} is missing columns: {', '.join(missing)}")
        return 2

    try:
        plot_ratios(summarize(frame), target, title=args.title)
    except (ValueError, OSError) as e:
        log_error(logger, e, context="plot")
        return 2
    return 0
