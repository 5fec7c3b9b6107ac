"""
Domain types for scheduling instances, machine environments, predictions and schedules.

Also provides the elementary order and objective operations shared by all engines.
Job ids are 1-based in every public structure; numpy arrays are indexed by ``id - 1``.
"""

from __future__ import annotations

from dataclasses import dataclass, replace
from enum import Enum
from functools import cached_property
from typing import Iterable, Optional, Sequence, Tuple, Union

import numpy as np


class EnvKind(Enum):
    """Supported machine environments."""

    SINGLE = "single"
    IDENTICAL = "identical"
    UNRELATED = "unrelated"


@dataclass(frozen=True)
class Job:
    """A job with weight w_j, processing requirement p_j and release date r_j."""

    id: int
    weight: float
    processing: float
    release: float = 0.0


@dataclass(frozen=True)
class MachineEnvironment:
    """
    Machine environment of an instance.

    ``rates`` is only set for unrelated machines and holds the m×n matrix of
    ℓ_ij, so that machine i needs p_ij = ℓ_ij · p_j time units for job j.
    """

    kind: EnvKind
    machines: int = 1
    rates: Optional[Tuple[Tuple[float, ...], ...]] = None

    @classmethod
    def single(cls) -> "MachineEnvironment":
        return cls(EnvKind.SINGLE, 1)

    @classmethod
    def identical(cls, machines: int) -> "MachineEnvironment":
        return cls(EnvKind.IDENTICAL, int(machines))

    @classmethod
    def unrelated(cls, rates: Iterable[Iterable[float]]) -> "MachineEnvironment":
        rows = tuple(tuple(float(value) for value in row) for row in rates)
        return cls(EnvKind.UNRELATED, len(rows), rows)

    def rate_matrix(self, n: int) -> np.ndarray:
        """Return the m×n matrix of ℓ_ij (all ones unless unrelated)."""
        if self.kind is EnvKind.UNRELATED:
            return np.array(self.rates, dtype=float).reshape(self.machines, -1)
        return np.ones((self.machines, n))


def _frozen(array: np.ndarray) -> np.ndarray:
    array.setflags(write=False)
    return array


@dataclass(frozen=True)
class Instance:
    """A job set together with its machine environment."""

    jobs: Tuple[Job, ...]
    env: MachineEnvironment = MachineEnvironment(EnvKind.SINGLE, 1)

    @classmethod
    def from_arrays(
        cls,
        weights: Sequence[float],
        processing: Sequence[float],
        releases: Optional[Sequence[float]] = None,
        env: Optional[MachineEnvironment] = None,
    ) -> "Instance":
        """
        Build an instance with ids 1..n from parallel vectors.

        Args:
            weights: w_j per job
            processing: p_j per job
            releases: r_j per job (all zero when omitted)
            env: Machine environment (single machine when omitted)

        Returns:
            The instance
        """
        if releases is None:
            releases = [0.0] * len(processing)
        jobs = tuple(
            Job(index + 1, float(w), float(p), float(r))
            for index, (w, p, r) in enumerate(zip(weights, processing, releases))
        )
        return cls(jobs, env or MachineEnvironment.single())

    @property
    def n(self) -> int:
        return len(self.jobs)

    @property
    def m(self) -> int:
        return self.env.machines

    @cached_property
    def weights(self) -> np.ndarray:
        return _frozen(np.array([job.weight for job in self.jobs], dtype=float))

    @cached_property
    def processing(self) -> np.ndarray:
        return _frozen(np.array([job.processing for job in self.jobs], dtype=float))

    @cached_property
    def releases(self) -> np.ndarray:
        return _frozen(np.array([job.release for job in self.jobs], dtype=float))

    @cached_property
    def rate_matrix(self) -> np.ndarray:
        return _frozen(self.env.rate_matrix(self.n))

    @cached_property
    def processing_times(self) -> np.ndarray:
        """The m×n matrix p_ij = ℓ_ij · p_j."""
        return _frozen(self.rate_matrix * self.processing[np.newaxis, :])

    @property
    def has_releases(self) -> bool:
        return bool(np.any(self.releases > 0))

    def with_processing(self, processing: Sequence[float]) -> "Instance":
        """Return the same jobs and environment with new processing requirements."""
        jobs = tuple(
            replace(job, processing=float(p)) for job, p in zip(self.jobs, processing)
        )
        return Instance(jobs, self.env)


@dataclass(frozen=True)
class SingleOrder:
    """A single predicted priority order over all job ids (highest priority first)."""

    order: Tuple[int, ...]

    def __len__(self) -> int:
        return len(self.order)

    def ranks(self) -> np.ndarray:
        """Return position of every job, indexed by ``id - 1``."""
        ranks = np.empty(len(self.order), dtype=int)
        ranks[np.asarray(self.order, dtype=int) - 1] = np.arange(len(self.order))
        return ranks


@dataclass(frozen=True)
class Assigned:
    """Per-machine predicted orders; every job appears in exactly one of them."""

    orders: Tuple[Tuple[int, ...], ...]

    @property
    def machines(self) -> int:
        return len(self.orders)

    def job_count(self) -> int:
        return sum(len(order) for order in self.orders)

    def machine_of(self, job_id: int) -> int:
        """Return the 0-based machine index m(σ̂, j)."""
        for machine, order in enumerate(self.orders):
            if job_id in order:
                return machine
        raise ValueError(f"Job {job_id} is not assigned to any machine")

    def assignment(self, n: int) -> np.ndarray:
        """Return the machine index of every job, indexed by ``id - 1``."""
        machines = np.full(n, -1, dtype=int)
        for machine, order in enumerate(self.orders):
            for job_id in order:
                machines[job_id - 1] = machine
        if np.any(machines < 0):
            missing = int(np.flatnonzero(machines < 0)[0]) + 1
            raise ValueError(f"Job {missing} is not assigned to any machine")
        return machines

    def ranks(self, n: int) -> np.ndarray:
        """Return position of every job within its machine order."""
        ranks = np.empty(n, dtype=int)
        for order in self.orders:
            for position, job_id in enumerate(order):
                ranks[job_id - 1] = position
        return ranks


PermutationPrediction = Union[SingleOrder, Assigned]


@dataclass(frozen=True)
class LengthPrediction:
    """Predicted processing requirements y_j, one per job."""

    y: Tuple[float, ...]

    def as_array(self) -> np.ndarray:
        return np.asarray(self.y, dtype=float)


@dataclass(frozen=True, eq=False)
class Segment:
    """Constant-rate interval; rates are stored as non-zero (machine, job, rate) triples."""

    start: float
    end: float
    machines: np.ndarray
    jobs: np.ndarray
    rates: np.ndarray

    @property
    def duration(self) -> float:
        return self.end - self.start

    def dense(self, m: int, n: int) -> np.ndarray:
        """Return the m×n rate matrix z of this segment."""
        z = np.zeros((m, n))
        z[self.machines, self.jobs] = self.rates
        return z


@dataclass(frozen=True, eq=False)
class Schedule:
    """Piecewise-constant rate assignment plus completion time per job (index ``id - 1``)."""

    segments: Tuple[Segment, ...]
    completions: Tuple[float, ...]

    def completion(self, job_id: int) -> float:
        return self.completions[job_id - 1]


def wspt_order(weights: Sequence[float], lengths: Sequence[float]) -> SingleOrder:
    """
    Order jobs by non-increasing density w_j / length_j, ties by ascending id.

    Args:
        weights: Job weights
        lengths: Strictly positive (true or predicted) lengths

    Returns:
        The WSPT permutation of ids 1..n

    Raises:
        ValueError: If a length is not strictly positive
    """
    weights = np.asarray(weights, dtype=float)
    lengths = np.asarray(lengths, dtype=float)
    if weights.shape != lengths.shape:
        raise ValueError("weights and lengths must have the same size")
    if np.any(lengths <= 0):
        raise ValueError("WSPT order needs strictly positive lengths")
    density = weights / lengths
    ids = np.arange(1, len(weights) + 1)
    # lexsort uses the last key as primary key
    order = np.lexsort((ids, -density))
    return SingleOrder(tuple(int(index) + 1 for index in order))


def perfect_order(instance: Instance) -> SingleOrder:
    """True WSPT order σ of a single or identical machine instance."""
    return wspt_order(instance.weights, instance.processing)


def sequence_objective(
    order: Sequence[int], weights: Sequence[float], lengths: Sequence[float]
) -> float:
    """Σ w_j C_j of running jobs back-to-back in ``order`` from time 0."""
    indices = np.asarray(order, dtype=int) - 1
    weights = np.asarray(weights, dtype=float)[indices]
    completions = np.cumsum(np.asarray(lengths, dtype=float)[indices])
    return float(np.dot(weights, completions))


def objective(schedule: Schedule, jobs: Sequence[Job]) -> float:
    """
    Weighted sum of completion times Σ_j w_j C_j.

    Raises:
        ValueError: If a job has no completion time
    """
    total = 0.0
    for job in jobs:
        if job.id - 1 >= len(schedule.completions):
            raise ValueError(f"Job {job.id} has no completion time")
        completion = schedule.completion(job.id)
        if completion is None or not np.isfinite(completion):
            raise ValueError(f"Job {job.id} has no completion time")
        total += job.weight * completion
    return total
