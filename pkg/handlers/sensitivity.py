"""
Sensitivity command handler.

Runs the noise-sensitivity experiment and writes its CSV (and optionally a plot).
"""

import argparse
from pathlib import Path
from typing import Optional

from config import Config
from services.experiments import ExperimentConfig, emit_csv, run_experiment, summarize
from utils.logger import log_command, log_error, setup_logger
from utils.plotting import plot_ratios

logger = setup_logger("handlers.sensitivity")

# argparse destinations that map onto ExperimentConfig keys
EXPERIMENT_FLAGS = (
    "dist",
    "n",
    "m",
    "env",
    "algos",
    "lambdas",
    "omegas",
    "gamma",
    "rounds",
    "runs",
    "seed",
    "weighted",
    "releases",
    "out",
)


def config_from_args(args: argparse.Namespace, experiment: str) -> ExperimentConfig:
    """
    Merge an optional ``--config`` file with CLI flags (flags win).

    Raises:
        ValueError: On invalid keys or values
        OSError: If the config file cannot be read
    """
    overrides = {flag: getattr(args, flag, None) for flag in EXPERIMENT_FLAGS}
    overrides["experiment"] = experiment

    config_path: Optional[str] = getattr(args, "config", None)
    if config_path:
        path = Path(config_path)
        if not path.exists():
            bundled = Config.get_config_file(config_path)
            if bundled is None:
                raise ValueError(f"Config file not found: {config_path}")
            path = bundled
        cfg = ExperimentConfig.from_file(path, **overrides)
    else:
        cfg = ExperimentConfig.from_mapping(overrides)
    cfg.validate()
    return cfg


def default_output(cfg: ExperimentConfig) -> Path:
    """Result path used when ``--out`` is not given."""
    return Config.OUTPUT_DIR / f"{cfg.experiment}_{cfg.env}_{cfg.distribution}_n{cfg.n}.csv"


def run_and_emit(cfg: ExperimentConfig, plot: bool = False) -> int:
    """Run an experiment, write its CSV and optional SVG; return the exit code."""
    records = run_experiment(cfg)
    path = emit_csv(records, cfg.out or default_output(cfg))

    summary = summarize(records)
    for row in summary.itertuples(index=False):
        logger.info(
            f"{row.algorithm} x={row.x:g}: mean ratio {row.mean:.4f} "
            f"[{row.ci_low:.4f}, {row.ci_high:.4f}] over {row.count} runs"
        )

    failed = sum(record.objective is None for record in records)
    if failed:
        logger.warning(f"{failed} cells failed; see diagnostic rows with empty objective")

    if plot:
        plot_ratios(summary, path.with_suffix(".svg"), title=f"{cfg.experiment} ({cfg.env}, {cfg.distribution})")
    return 0


def sensitivity_command(args: argparse.Namespace) -> int:
    """
    Handle ``predsched sensitivity``.

    Args:
        args: Parsed command-line arguments

    Returns:
        Process exit code
    """
    try:
        cfg = config_from_args(args, "sensitivity")
    except (ValueError, OSError) as e:
        log_error(logger, e, context="sensitivity config")
        return 2

    log_command(logger, "sensitivity", f"env={cfg.env}, n={cfg.n}, runs={cfg.runs}")
    return run_and_emit(cfg, plot=getattr(args, "plot", False))
