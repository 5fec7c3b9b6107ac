"""
Online-learning command handler.
"""

import argparse

from handlers.sensitivity import config_from_args, run_and_emit
from utils.logger import log_command, log_error, setup_logger

logger = setup_logger("handlers.online")


def online_command(args: argparse.Namespace) -> int:
    """
    Handle ``predsched online``: rounds of ERM-learned predictions on noisy copies of
    a base instance.

    Args:
        args: Parsed command-line arguments

    Returns:
        Process exit code
    """
    try:
        cfg = config_from_args(args, "online")
    except (ValueError, OSError) as e:
        log_error(logger, e, context="online config")
        return 2

    log_command(logger, "online", f"env={cfg.env}, γ={cfg.gamma:g}, rounds={cfg.rounds}")
    return run_and_emit(cfg, plot=getattr(args, "plot", False))
