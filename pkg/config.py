"""
Configuration module for the predsched experiment toolkit.

This module handles all environment variables, validation, and default values.
"""

import os
from pathlib import Path
from typing import List, Optional
from dotenv import load_dotenv

# Load environment variables
load_dotenv()


def _float_list(raw: str) -> List[float]:
    return [float(item) for item in raw.split(",") if item.strip()]


class Config:
    """Central configuration class for simulations and experiments."""

    # Logging
    LOG_LEVEL: str = os.getenv("PREDSCHED_LOG_LEVEL", "INFO")
    LOG_FORMAT: str = os.getenv("PREDSCHED_LOG_FORMAT", "text")  # text or json

    # Experiment defaults
    DEFAULT_N: int = int(os.getenv("PREDSCHED_DEFAULT_N", "1000"))
    DEFAULT_RUNS: int = int(os.getenv("PREDSCHED_DEFAULT_RUNS", "10"))
    DEFAULT_SEED: int = int(os.getenv("PREDSCHED_DEFAULT_SEED", "0"))
    DEFAULT_ROUNDS: int = int(os.getenv("PREDSCHED_DEFAULT_ROUNDS", "10"))
    DEFAULT_GAMMA: float = float(os.getenv("PREDSCHED_DEFAULT_GAMMA", "10"))
    DEFAULT_OMEGAS: List[float] = _float_list(
        os.getenv("PREDSCHED_DEFAULT_OMEGAS", "0,0.1,0.5,1,2,5,10,20,35,50")
    )
    DEFAULT_LAMBDAS: List[float] = _float_list(
        os.getenv("PREDSCHED_DEFAULT_LAMBDAS", "0.1,0.5,0.8")
    )

    # Numerical tolerances
    TIME_TOLERANCE: float = float(os.getenv("PREDSCHED_TIME_TOLERANCE", "1e-9"))
    COMPLETION_TOLERANCE: float = float(
        os.getenv("PREDSCHED_COMPLETION_TOLERANCE", "1e-9")
    )
    LENGTH_FLOOR: float = float(os.getenv("PREDSCHED_LENGTH_FLOOR", "1e-9"))

    # Proportional Fairness solver
    PF_MAX_ITERS: int = int(os.getenv("PREDSCHED_PF_MAX_ITERS", "10000"))
    PF_TOLERANCE: float = float(os.getenv("PREDSCHED_PF_TOLERANCE", "1e-6"))

    # Verification suites
    VERIFY_TRIALS_SCALE: float = float(os.getenv("PREDSCHED_VERIFY_TRIALS_SCALE", "1.0"))

    # Paths
    BASE_DIR: Path = Path(__file__).parent
    CONFIGS_DIR: Path = BASE_DIR / "configs"
    OUTPUT_DIR: Path = Path(os.getenv("PREDSCHED_OUTPUT_DIR", str(BASE_DIR / "results")))

    @classmethod
    def validate(cls) -> None:
        """
        Validate configuration values.

        Raises:
            ValueError: If a configuration value is out of range.
        """
        if cls.LOG_FORMAT not in ("text", "json"):
            raise ValueError("PREDSCHED_LOG_FORMAT must be 'text' or 'json'")

        if cls.DEFAULT_N < 1:
            raise ValueError("PREDSCHED_DEFAULT_N must be at least 1")

        if cls.DEFAULT_RUNS < 1:
            raise ValueError("PREDSCHED_DEFAULT_RUNS must be at least 1")

        if cls.DEFAULT_ROUNDS < 1:
            raise ValueError("PREDSCHED_DEFAULT_ROUNDS must be at least 1")

        if cls.DEFAULT_GAMMA < 0:
            raise ValueError("PREDSCHED_DEFAULT_GAMMA must be non-negative")

        if any(omega < 0 for omega in cls.DEFAULT_OMEGAS):
            raise ValueError("PREDSCHED_DEFAULT_OMEGAS must be non-negative")

        if any(not 0 < lam < 1 for lam in cls.DEFAULT_LAMBDAS):
            raise ValueError("PREDSCHED_DEFAULT_LAMBDAS must lie in (0, 1)")

        for name in ("TIME_TOLERANCE", "COMPLETION_TOLERANCE", "LENGTH_FLOOR", "PF_TOLERANCE"):
            if getattr(cls, name) <= 0:
                raise ValueError(f"PREDSCHED_{name} must be positive")

        if cls.PF_MAX_ITERS < 1:
            raise ValueError("PREDSCHED_PF_MAX_ITERS must be at least 1")

        if cls.VERIFY_TRIALS_SCALE <= 0:
            raise ValueError("PREDSCHED_VERIFY_TRIALS_SCALE must be positive")

    @classmethod
    def get_config_file(cls, filename: str) -> Optional[Path]:
        """
        Get path to a bundled experiment config file.

        Args:
            filename: Name of the config file (e.g., 'sensitivity_single.conf')

        Returns:
            Path object if file exists, None otherwise
        """
        path = cls.CONFIGS_DIR / filename
        return path if path.exists() else None


# Validate configuration on import
Config.validate()
