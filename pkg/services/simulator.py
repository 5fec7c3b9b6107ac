"""
Event-driven rate-based preemptive scheduling engine.

A policy decides a rate matrix z (machines × jobs) for the current state; the engine
advances time to the next event (release, earliest completion under the current rates,
or policy epoch), re-queries the policy and repeats until every job is complete.
"""

from __future__ import annotations

from abc import ABC, abstractmethod
from dataclasses import dataclass
from typing import Iterable, List, Optional

import numpy as np

from config import Config
from services.model import (
    EnvKind,
    Instance,
    PermutationPrediction,
    Schedule,
    Segment,
    SingleOrder,
)
from utils.logger import setup_logger
from utils.validators import validate_instance, validate_prediction

logger = setup_logger("services.simulator")

# Absolute slack on the per-machine and per-job capacity checks
CAPACITY_TOLERANCE = 1e-9
MAX_EVENTS = 5_000_000


class InfeasibleRatesError(RuntimeError):
    """Raised when a policy returns rates violating capacity or visibility."""


class NoProgressError(RuntimeError):
    """Raised when released jobs stay unprocessed with no pending event."""


@dataclass(frozen=True, eq=False)
class PolicyState:
    """
    Snapshot handed to a policy at an event.

    ``alive`` holds the indices (``id - 1``) of released, unfinished jobs in ascending
    order; ``remaining`` holds p_j(t) for every job and must not be written to.
    """

    instance: Instance
    time: float
    alive: np.ndarray
    remaining: np.ndarray

    @property
    def m(self) -> int:
        return self.instance.m

    @property
    def n(self) -> int:
        return self.instance.n

    def remaining_times(self) -> np.ndarray:
        """Return p_ij(t) = ℓ_ij · p_j(t) for every machine and job."""
        return self.instance.rate_matrix * self.remaining[np.newaxis, :]

    def restrict(self, alive: np.ndarray, time: Optional[float] = None) -> "PolicyState":
        """Return the same state with a reduced alive set (and optionally a virtual clock)."""
        return PolicyState(
            self.instance, self.time if time is None else time, alive, self.remaining
        )


class Policy(ABC):
    """Base class of every rate policy driven by :func:`simulate`."""

    name = "policy"

    def reset(self, instance: Instance) -> None:
        """Prepare per-run state; called once before the first event."""

    @abstractmethod
    def schedule(self, state: PolicyState) -> np.ndarray:
        """Return the m×n rate matrix for the current state."""

    def next_internal_event(self, state: PolicyState) -> Optional[float]:
        """Return the next time the policy wants to be re-queried, if any."""
        return None


class PriorityPolicy(Policy):
    """
    Run the available jobs of highest priority in a fixed permutation.

    With a SingleOrder the top-m available jobs run (one per machine); with an Assigned
    prediction every machine runs its highest-priority available assigned job.
    """

    name = "priority"

    def __init__(self, prediction: PermutationPrediction):
        self.prediction = prediction
        self._ranks: Optional[np.ndarray] = None
        self._machine_of: Optional[np.ndarray] = None

    def reset(self, instance: Instance) -> None:
        is_valid, error = validate_prediction(instance, self.prediction)
        if not is_valid:
            raise ValueError(error)

        if isinstance(self.prediction, SingleOrder):
            if instance.env.kind is EnvKind.UNRELATED and instance.m > 1:
                raise ValueError("SingleOrder predictions need a single or identical machine environment")
            self._ranks = self.prediction.ranks()
            self._machine_of = None
        else:
            self._ranks = self.prediction.ranks(instance.n)
            self._machine_of = self.prediction.assignment(instance.n)

    def schedule(self, state: PolicyState) -> np.ndarray:
        z = np.zeros((state.m, state.n))
        alive = state.alive
        if alive.size == 0:
            return z

        ranks = self._ranks[alive]
        if self._machine_of is None:
            top = alive[np.argsort(ranks, kind="stable")[: state.m]]
            z[np.arange(top.size), top] = 1.0
            return z

        machines = self._machine_of[alive]
        order = np.lexsort((ranks, machines))
        sorted_machines = machines[order]
        first = np.ones(order.size, dtype=bool)
        first[1:] = sorted_machines[1:] != sorted_machines[:-1]
        chosen = alive[order[first]]
        z[sorted_machines[first], chosen] = 1.0
        return z


def check_rates(state: PolicyState, z: np.ndarray) -> None:
    """
    Check a rate matrix against capacity and visibility constraints.

    Raises:
        InfeasibleRatesError: On a negative rate, an exceeded machine or job capacity,
            or positive rate for a job that is not alive
    """
    expected = (state.m, state.n)
    if z.shape != expected:
        raise InfeasibleRatesError(f"Rate matrix has shape {z.shape}, expected {expected}")

    if np.any(z < -CAPACITY_TOLERANCE) or not np.all(np.isfinite(z)):
        raise InfeasibleRatesError(f"Negative or non-finite rate at t={state.time}")

    machine_load = z.sum(axis=1)
    if np.any(machine_load > 1 + CAPACITY_TOLERANCE):
        machine = int(np.argmax(machine_load))
        raise InfeasibleRatesError(
            f"Machine {machine + 1} over capacity ({machine_load[machine]:.12g}) at t={state.time}"
        )

    job_load = z.sum(axis=0)
    if np.any(job_load > 1 + CAPACITY_TOLERANCE):
        job = int(np.argmax(job_load))
        raise InfeasibleRatesError(
            f"Job {job + 1} over capacity ({job_load[job]:.12g}) at t={state.time}"
        )

    hidden = np.ones(state.n, dtype=bool)
    hidden[state.alive] = False
    if np.any(job_load[hidden] > CAPACITY_TOLERANCE):
        job = int(np.flatnonzero(hidden & (job_load > CAPACITY_TOLERANCE))[0])
        raise InfeasibleRatesError(f"Job {job + 1} receives rate while not alive at t={state.time}")


def simulate(
    instance: Instance,
    policy: Policy,
    record: bool = True,
    extra_epochs: Iterable[float] = (),
) -> Schedule:
    """
    Simulate a rate policy on an instance from time 0 until every job completes.

    Args:
        instance: Valid instance
        policy: Rate policy (reset before the first event)
        record: Whether to store rate segments (completions are always stored)
        extra_epochs: Additional times at which the policy is re-queried

    Returns:
        The resulting schedule

    Raises:
        ValueError: If the instance is invalid
        InfeasibleRatesError: If the policy returns infeasible rates
        NoProgressError: If released jobs starve with no pending event
    """
    is_valid, error = validate_instance(instance)
    if not is_valid:
        raise ValueError(error)

    n = instance.n
    ell = instance.rate_matrix
    processing = instance.processing
    releases = instance.releases

    remaining = processing.copy()
    remaining_view = remaining.view()
    remaining_view.setflags(write=False)
    completions = np.full(n, np.nan)
    finished = np.zeros(n, dtype=bool)
    released = releases <= 0
    epochs = sorted(float(epoch) for epoch in extra_epochs)
    segments: List[Segment] = []

    policy.reset(instance)
    time = 0.0
    stalled = 0
    events = 0

    while not finished.all():
        events += 1
        if events > MAX_EVENTS:
            raise NoProgressError(f"Event limit exceeded at t={time}")

        tolerance = Config.TIME_TOLERANCE * max(1.0, abs(time))
        pending = releases[~released]
        next_release = float(pending.min()) if pending.size else np.inf
        while epochs and epochs[0] <= time + tolerance:
            epochs.pop(0)
        next_extra = epochs[0] if epochs else np.inf

        alive = np.flatnonzero(released & ~finished)
        if alive.size == 0:
            time = max(time, min(next_release, next_extra))
            released |= releases <= time + Config.TIME_TOLERANCE * max(1.0, time)
            continue

        state = PolicyState(instance, time, alive, remaining_view)
        z = np.asarray(policy.schedule(state), dtype=float)
        check_rates(state, z)
        z = np.clip(z, 0.0, None)

        epoch = policy.next_internal_event(state)
        if epoch is not None and epoch <= time + tolerance:
            epoch = None

        throughput = (z / ell).sum(axis=0)
        moving = alive[throughput[alive] > 0]
        if moving.size:
            finish_times = time + remaining[moving] / throughput[moving]
            first = int(np.argmin(finish_times))
            next_completion = float(finish_times[first])
            stalled = 0
        else:
            next_completion = np.inf
            if epoch is None:
                stalled += 1
                if stalled >= 2 or not np.isfinite(next_release):
                    raise NoProgressError(
                        f"No progress at t={time} with {alive.size} released unfinished jobs"
                    )

        next_time = min(next_release, next_completion, next_extra, np.inf if epoch is None else epoch)
        if not np.isfinite(next_time):
            raise NoProgressError(f"No pending event at t={time}")

        duration = next_time - time
        if duration > 0 and moving.size:
            remaining[moving] = np.maximum(remaining[moving] - throughput[moving] * duration, 0.0)
            if record:
                machines, jobs = np.nonzero(z)
                segments.append(
                    Segment(time, next_time, machines, jobs, z[machines, jobs].copy())
                )

        time = next_time
        done = alive[remaining[alive] <= Config.COMPLETION_TOLERANCE * processing[alive]]
        if moving.size and next_completion <= time:
            done = np.union1d(done, moving[first : first + 1])
        remaining[done] = 0.0
        completions[done] = time
        finished[done] = True
        released |= releases <= time + Config.TIME_TOLERANCE * max(1.0, time)

    logger.debug(f"Simulated {policy.name} on n={n}: {events} events")
    return Schedule(tuple(segments), tuple(float(c) for c in completions))


def priority_schedule(
    instance: Instance, prediction: PermutationPrediction, record: bool = True
) -> Schedule:
    """
    Schedule by a fixed permutation: each machine runs its highest-priority available job.

    Args:
        instance: Valid instance
        prediction: SingleOrder (top-m rule) or Assigned (per-machine orders)
        record: Whether to store rate segments

    Returns:
        The priority schedule

    Raises:
        ValueError: If a job is unassigned or the prediction does not fit the environment
    """
    return simulate(instance, PriorityPolicy(prediction), record=record)

