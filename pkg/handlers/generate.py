"""
Generate command handler.

Draws one random instance and writes it in the instance text format.
"""

import argparse
import sys

from handlers.sensitivity import config_from_args
from services.experiments import generate_instance, stream
from utils.formatters import format_instance
from utils.logger import log_command, log_error, setup_logger

logger = setup_logger("handlers.generate")


def generate_command(args: argparse.Namespace) -> int:
    """
    Handle ``predsched generate``.

    Writes to ``--out`` or to stdout. The instance equals run 0 of an experiment
    with the same flags and seed.

    Args:
        args: Parsed command-line arguments

    Returns:
        Process exit code
    """
    try:
        cfg = config_from_args(args, "sensitivity")
    except (ValueError, OSError) as e:
        log_error(logger, e, context="generate config")
        return 2

    log_command(logger, "generate", f"{cfg.distribution}, n={cfg.n}, env={cfg.env}")
    instance = generate_instance(cfg, stream(cfg.seed, 0, 0, 0))
    text = format_instance(instance)

    if cfg.out is None:
        sys.stdout.write(text)
        return 0

    try:
        cfg.out.parent.mkdir(parents=True, exist_ok=True)
        cfg.out.write_text(text, encoding="utf-8")
    except OSError as e:
        log_error(logger, e, context=str(cfg.out))
        return 2
    logger.info(f"Instance written to {cfg.out}")
    return 0
