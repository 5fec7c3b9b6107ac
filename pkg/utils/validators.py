"""
Input validation utilities for predsched.

Provides validation functions for instances, predictions, confidence parameters
and experiment configurations. Every validator returns ``(is_valid, error_message)``.
"""

import math
from typing import Tuple

import numpy as np

from services.model import Assigned, EnvKind, Instance, PermutationPrediction, SingleOrder


def validate_instance(instance: Instance) -> Tuple[bool, str]:
    """
    Validate the type invariants of an instance.

    Args:
        instance: Instance to validate

    Returns:
        Tuple of (is_valid, error_message). Error message names the first violated invariant.
    """
    if not instance.jobs:
        return False, "Instance must contain at least one job"

    ids = [job.id for job in instance.jobs]
    if len(set(ids)) != len(ids):
        return False, "Duplicate job ids"

    if sorted(ids) != list(range(1, len(ids) + 1)) or ids != sorted(ids):
        return False, "Job ids must be contiguous 1..n in order"

    for job in instance.jobs:
        if not math.isfinite(job.weight) or job.weight <= 0:
            return False, f"Job {job.id} has non-positive weight"
        if not math.isfinite(job.processing) or job.processing <= 0:
            return False, f"Job {job.id} has non-positive processing"
        if not math.isfinite(job.release) or job.release < 0:
            return False, f"Job {job.id} has negative release"

    env = instance.env
    if env.machines < 1:
        return False, "Machine count must be positive"

    if env.kind is EnvKind.SINGLE and env.machines != 1:
        return False, "Single machine environment must have exactly one machine"

    if env.kind is EnvKind.UNRELATED:
        if env.rates is None or len(env.rates) != env.machines:
            return False, "Rate matrix dimension mismatch (machines)"
        if any(len(row) != instance.n for row in env.rates):
            return False, "Rate matrix dimension mismatch (jobs)"
        rates = np.asarray(env.rates, dtype=float)
        if not np.all(np.isfinite(rates)) or np.any(rates <= 0):
            return False, "Rates must be positive and finite"
    elif env.rates is not None:
        return False, "Rates are only allowed for unrelated machines"

    return True, ""


def validate_prediction(
    instance: Instance, prediction: PermutationPrediction
) -> Tuple[bool, str]:
    """
    Validate that a permutation prediction covers the instance's jobs.

    Args:
        instance: Instance the prediction refers to
        prediction: SingleOrder or Assigned prediction

    Returns:
        Tuple of (is_valid, error_message). Error message is empty if valid.
    """
    expected = set(range(1, instance.n + 1))

    if isinstance(prediction, SingleOrder):
        if len(prediction.order) != instance.n or set(prediction.order) != expected:
            return False, "Order must be a permutation of the job ids"
        return True, ""

    if isinstance(prediction, Assigned):
        if prediction.machines != instance.m:
            return False, "Assigned prediction must have one order per machine"
        seen = [job_id for order in prediction.orders for job_id in order]
        if len(seen) != len(set(seen)):
            return False, "A job is assigned more than once"
        missing = expected - set(seen)
        if missing:
            return False, f"Job {min(missing)} is unassigned"
        if set(seen) != expected:
            return False, "Assigned prediction references unknown job ids"
        return True, ""

    return False, f"Unsupported prediction type {type(prediction).__name__}"


def validate_lambda(lam: float) -> Tuple[bool, str]:
    """
    Validate a Preferential Time Sharing confidence parameter.

    Args:
        lam: Confidence parameter λ

    Returns:
        Tuple of (is_valid, error_message). Error message is empty if valid.
    """
    if not isinstance(lam, (int, float)) or not math.isfinite(lam):
        return False, "λ must be a real number"

    if not 0 < lam < 1:
        return False, f"λ must lie in the open interval (0, 1), got {lam}"

    return True, ""


def validate_multiple_of(value: float, step: float, tolerance: float = 1e-9) -> bool:
    """Return whether ``value`` is an integer multiple of ``step`` up to a relative tolerance."""
    ratio = value / step
    return abs(ratio - round(ratio)) <= tolerance * max(1.0, abs(ratio))


def validate_experiment_config(cfg) -> Tuple[bool, str]:
    """
    Validate an experiment configuration.

    Args:
        cfg: ExperimentConfig (any object with the same attributes)

    Returns:
        Tuple of (is_valid, error_message). Error message is empty if valid.
    """
    if cfg.experiment not in ("sensitivity", "online"):
        return False, f"Unknown experiment: {cfg.experiment}"

    if cfg.distribution not in ("pareto", "exponential", "weibull"):
        return False, f"Unknown distribution: {cfg.distribution}"

    if cfg.env not in {kind.value for kind in EnvKind}:
        return False, f"Unknown environment: {cfg.env}"

    if cfg.n < 1:
        return False, "n must be at least 1"

    if cfg.m < 1:
        return False, "m must be at least 1"

    if cfg.env == EnvKind.SINGLE.value and cfg.m != 1:
        return False, "Single machine environment must have m = 1"

    if cfg.runs < 1:
        return False, "runs must be at least 1"

    if not cfg.algorithms:
        return False, "At least one algorithm is required"

    for lam in cfg.lambdas:
        is_valid, error = validate_lambda(lam)
        if not is_valid:
            return False, error

    if cfg.experiment == "sensitivity":
        if not cfg.omegas:
            return False, "At least one ω value is required"
        if any(not math.isfinite(omega) or omega < 0 for omega in cfg.omegas):
            return False, "ω values must be non-negative"
    else:
        if cfg.rounds < 1:
            return False, "rounds must be at least 1"
        if not math.isfinite(cfg.gamma) or cfg.gamma < 0:
            return False, "γ must be non-negative"

    return True, ""
