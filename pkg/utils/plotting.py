"""
SVG line charts of empirical competitive ratios.
"""

from pathlib import Path
from typing import Optional

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402
import pandas as pd  # noqa: E402

from utils.logger import setup_logger  # noqa: E402

logger = setup_logger("utils.plotting")

PLOT_PARAMS = {
    "axes.labelsize": 10,
    "font.size": 9,
    "legend.fontsize": 8,
    "xtick.labelsize": 9,
    "ytick.labelsize": 9,
    "lines.linewidth": 1.2,
    "lines.markersize": 3,
    "figure.figsize": [6.4, 4.0],
    "svg.hashsalt": "predsched",
}

X_LABELS = {"sensitivity": "noise ω", "online": "round"}


def plot_ratios(summary: pd.DataFrame, path: Path, title: Optional[str] = None) -> Path:
    """
    Plot mean ratio against x with 95% confidence bands, one series per algorithm.

    Args:
        summary: Output of ``services.experiments.summarize``
        path: Target ``.svg`` file
        title: Optional figure title

    Returns:
        The written path

    Raises:
        ValueError: If the summary is empty
    """
    if summary.empty:
        raise ValueError("Nothing to plot")
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    experiment = str(summary["experiment"].iloc[0])

    with plt.rc_context(PLOT_PARAMS):
        fig, ax = plt.subplots()
        for algorithm, series in summary.groupby("algorithm", sort=True):
            series = series.sort_values("x")
            x = series["x"].to_numpy(dtype=float)
            ax.plot(x, series["mean"].to_numpy(), marker="o", label=algorithm)
            ax.fill_between(
                x,
                series["ci_low"].to_numpy(),
                series["ci_high"].to_numpy(),
                alpha=0.2,
            )
        if experiment == "sensitivity" and np.all(summary["x"] >= 0):
            ax.set_xscale("symlog", linthresh=1.0)
        ax.set_xlabel(X_LABELS.get(experiment, "x"))
        ax.set_ylabel("empirical competitive ratio")
        if title:
            ax.set_title(title)
        ax.grid(True, alpha=0.3)
        ax.legend(loc="best")
        fig.tight_layout()
        # fixed metadata keeps the SVG byte-identical across runs
        fig.savefig(path, format="svg", metadata={"Date": None})
        plt.close(fig)

    logger.info(f"Wrote plot to {path}")
    return path
