"""
Logging configuration for predsched.

Provides structured logging with different formats and levels.
"""

import logging
import sys
from typing import Optional

from config import Config


def setup_logger(
    name: str = "predsched", level: Optional[str] = None
) -> logging.Logger:
    """
    Setup and configure logger for a module.

    Args:
        name: Logger name
        level: Logging level (DEBUG, INFO, WARNING, ERROR, CRITICAL)

    Returns:
        Configured logger instance
    """
    logger = logging.getLogger(name)
    log_level = getattr(logging, level or Config.LOG_LEVEL)
    logger.setLevel(log_level)

    # Remove existing handlers to avoid duplicates
    logger.handlers = []

    handler = logging.StreamHandler(sys.stderr)
    handler.setLevel(log_level)

    if Config.LOG_FORMAT == "json":
        formatter = logging.Formatter(
            '{"timestamp": "%(asctime)s", "level": "%(levelname)s", '
            '"logger": "%(name)s", "message": "%(message)s"}'
        )
    else:
        formatter = logging.Formatter(
            "%(asctime)s - %(name)s - %(levelname)s - %(message)s",
            datefmt="%Y-%m-%d %H:%M:%S",
        )

    handler.setFormatter(formatter)
    logger.addHandler(handler)
    logger.propagate = False

    return logger


def log_command(logger: logging.Logger, command: str, detail: str = "") -> None:
    """
    Log a CLI sub-command execution.

    Args:
        logger: Logger instance
        command: Sub-command name (e.g., 'sensitivity', 'verify')
        detail: Short description of the arguments
    """
    detail_str = f" ({detail})" if detail else ""
    logger.info(f"Executing command: {command}{detail_str}")


def log_error(logger: logging.Logger, error: Exception, context: str = "") -> None:
    """
    Log an error with context.

    Args:
        logger: Logger instance
        error: Exception object
        context: Additional context about where the error occurred
    """
    context_str = f" [{context}]" if context else ""
    logger.error(f"Error{context_str}: {type(error).__name__}: {str(error)}")


def log_cell_result(
    logger: logging.Logger, cell: str, elapsed: float, success: bool = True
) -> None:
    """
    Log the outcome of one experiment cell.

    Args:
        logger: Logger instance
        cell: Cell coordinates (experiment, algorithm, x, run)
        elapsed: Wall time spent on the cell (in seconds)
        success: Whether the simulation finished
    """
    status = "success" if success else "failed"
    logger.debug(f"Cell {cell}: {status}, time: {elapsed:.3f}s")


def log_check_result(logger: logging.Logger, suite: str, result) -> None:
    """
    Log the outcome of one verification check.

    Args:
        logger: Logger instance
        suite: Suite name (lemmas, dual, props)
        result: CheckResult of the check
    """
    if result.failures:
        logger.error(
            f"{suite}/{result.name}: {result.failures}/{result.trials} failed, "
            f"first seed {result.first_failure_seed}: {result.detail}"
        )
    else:
        logger.info(f"{suite}/{result.name}: {result.trials} trials passed in {result.elapsed:.1f}s")
