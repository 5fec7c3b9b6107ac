"""
Prediction generation: length predictions, noise models and the ERM permutation learner.
"""

from __future__ import annotations

from dataclasses import dataclass
from enum import Enum
from typing import Sequence, Tuple, Union

import numpy as np

from config import Config
from services.algorithms import run_minincrease
from services.errors import eta_r, eta_s
from services.model import (
    EnvKind,
    Instance,
    LengthPrediction,
    PermutationPrediction,
    SingleOrder,
    wspt_order,
)
from utils.logger import setup_logger

logger = setup_logger("services.learn")

SeedLike = Union[int, np.random.SeedSequence, np.random.Generator, None]


class NoiseMode(Enum):
    """Gaussian noise with a fixed deviation ω or a deviation γ·√p_j."""

    FIXED = "fixed"
    SCALED = "scaled"


@dataclass(frozen=True)
class SampleSet:
    """Instances J_1..J_z sharing job ids and machine environment."""

    samples: Tuple[Instance, ...]

    def __post_init__(self) -> None:
        if not self.samples:
            raise ValueError("Sample set must contain at least one instance")
        first = self.samples[0]
        for sample in self.samples[1:]:
            if sample.n != first.n:
                raise ValueError("All samples must have the same number of jobs")
            if sample.env.kind is not first.env.kind or sample.m != first.m:
                raise ValueError("All samples must share the machine environment")

    @property
    def z(self) -> int:
        return len(self.samples)

    def average_instance(self) -> Instance:
        """Instance of mean weights, processing requirements and release dates."""
        weights = np.mean([sample.weights for sample in self.samples], axis=0)
        processing = np.mean([sample.processing for sample in self.samples], axis=0)
        releases = np.mean([sample.releases for sample in self.samples], axis=0)
        return Instance.from_arrays(weights, processing, releases, self.samples[0].env)


def length_to_permutation(weights: Sequence[float], y: LengthPrediction) -> SingleOrder:
    """
    WSPT order on predicted lengths; lengths below the floor are raised to it.

    Args:
        weights: True job weights
        y: Predicted lengths

    Returns:
        The predicted permutation
    """
    lengths = np.maximum(y.as_array(), Config.LENGTH_FLOOR)
    return wspt_order(weights, lengths)


def predict_permutation(instance: Instance, y: LengthPrediction) -> PermutationPrediction:
    """
    Convert a length prediction into the prediction type of the instance's environment.

    Single and identical machines get the WSPT order on y; unrelated machines get the
    Assigned prediction of clairvoyant MinIncrease run on the predicted lengths.
    """
    if instance.env.kind is EnvKind.UNRELATED:
        lengths = np.maximum(y.as_array(), Config.LENGTH_FLOOR)
        return run_minincrease(instance.with_processing(lengths), record=False).prediction
    return length_to_permutation(instance.weights, y)


def perturb_lengths(
    processing: Sequence[float],
    mode: NoiseMode,
    scale: float,
    rng: SeedLike = None,
) -> LengthPrediction:
    """
    Add Gaussian noise to true processing requirements.

    Args:
        processing: True p_j
        mode: FIXED (deviation ``scale``) or SCALED (deviation ``scale``·√p_j)
        scale: ω or γ, non-negative
        rng: Seed or numpy Generator

    Returns:
        y_j = max(p_j + N(0, std_j²), floor)

    Raises:
        ValueError: If ``scale`` is negative
    """
    if scale < 0:
        raise ValueError(f"Noise scale must be non-negative, got {scale}")
    processing = np.asarray(processing, dtype=float)
    generator = rng if isinstance(rng, np.random.Generator) else np.random.default_rng(rng)

    deviation = scale if mode is NoiseMode.FIXED else scale * np.sqrt(processing)
    noise = generator.standard_normal(processing.size) * deviation
    return LengthPrediction(tuple(np.maximum(processing + noise, Config.LENGTH_FLOOR).tolist()))


def erm_learn(samples: SampleSet) -> PermutationPrediction:
    """
    Empirical risk minimisation over permutation predictions.

    Orders jobs by WSPT on the average instance. With shared weights the mean
    objective of any order is its objective on the average instance, so this order
    attains the minimum empirical η^S. Unrelated machines use clairvoyant MinIncrease
    on the average instance.

    Args:
        samples: Training instances

    Returns:
        SingleOrder for single/identical machines, Assigned for unrelated machines
    """
    average = samples.average_instance()
    logger.debug(f"ERM over {samples.z} samples of {average.n} jobs")
    if average.env.kind is EnvKind.UNRELATED:
        return run_minincrease(average, record=False).prediction
    return wspt_order(average.weights, average.processing)


def empirical_error(prediction: PermutationPrediction, samples: SampleSet) -> float:
    """(1/z) Σ_s η^S(J_s, σ̂); η^R against each sample's reference for Assigned predictions."""
    if isinstance(prediction, SingleOrder):
        errors = [eta_s(sample, prediction, collect_pairs=False).eta_s for sample in samples.samples]
    else:
        errors = [eta_r(sample, prediction).eta_r for sample in samples.samples]
    return float(np.mean(errors))
