"""
Prediction-error measures and the dual-fitting verifier.

η^S sums the cost of pairs a permutation prediction inverts against the true WSPT
order; η^R compares per-job objective contributions W_j of the predicted and the
reference priority schedules. ℓ1 and ν are the length-based measures they are
compared against.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np

from config import Config
from services.algorithms import run_minincrease
from services.model import (
    Assigned,
    EnvKind,
    Instance,
    PermutationPrediction,
    Schedule,
    SingleOrder,
    objective,
    perfect_order,
)
from services.simulator import priority_schedule
from utils.logger import setup_logger
from utils.validators import validate_multiple_of, validate_prediction

logger = setup_logger("services.errors")

# Row block for the pairwise inversion scan
_INVERSION_BLOCK = 512


@dataclass(frozen=True, eq=False)
class ErrorReport:
    """
    Error of a prediction on one instance.

    ``per_job`` holds η_j: the attributed η^S share for :func:`eta_s` reports and
    W_j(σ̂) − W_j(σ_ref) for :func:`eta_r` reports.
    """

    eta_s: Optional[float] = None
    eta_r: Optional[float] = None
    per_job: np.ndarray = field(default_factory=lambda: np.zeros(0))
    inversions: List[Tuple[int, int]] = field(default_factory=list)
    ell1: Optional[float] = None
    nu: Optional[float] = None

    def as_record(self) -> Dict[str, Optional[float]]:
        """Flat ``eta_s eta_r ell1 nu`` record; unset measures map to None."""
        return {"eta_s": self.eta_s, "eta_r": self.eta_r, "ell1": self.ell1, "nu": self.nu}


def eta_s(
    instance: Instance, prediction: SingleOrder, collect_pairs: bool = True
) -> ErrorReport:
    """
    η^S: Σ over inverted pairs (j', j) of w_j' p_j − w_j p_j'.

    A pair is inverted when j' precedes j in the true WSPT order σ (density, ties by
    id) but follows it in σ̂. Each contribution is attributed to j.

    Args:
        instance: Instance with the true weights and processing requirements
        prediction: Predicted permutation
        collect_pairs: Whether to return the list of inverted pairs

    Returns:
        ErrorReport with ``eta_s``, ``per_job`` and ``inversions``

    Raises:
        ValueError: If the prediction is not a permutation of the job ids
    """
    if not isinstance(prediction, SingleOrder):
        raise ValueError("η^S is defined for SingleOrder predictions")
    if len(prediction.order) != instance.n or set(prediction.order) != set(range(1, instance.n + 1)):
        raise ValueError("Order must be a permutation of the job ids")

    n = instance.n
    weights = instance.weights
    processing = instance.processing
    true_ranks = perfect_order(instance).ranks()
    predicted_ranks = prediction.ranks()

    per_job = np.zeros(n)
    pairs: List[Tuple[int, int]] = []
    for start in range(0, n, _INVERSION_BLOCK):
        rows = np.arange(start, min(n, start + _INVERSION_BLOCK))
        inverted = (true_ranks[rows, np.newaxis] < true_ranks[np.newaxis, :]) & (
            predicted_ranks[rows, np.newaxis] > predicted_ranks[np.newaxis, :]
        )
        first, second = np.nonzero(inverted)
        earlier = rows[first]
        cost = weights[earlier] * processing[second] - weights[second] * processing[earlier]
        np.add.at(per_job, second, cost)
        if collect_pairs:
            pairs.extend(zip((earlier + 1).tolist(), (second + 1).tolist()))

    return ErrorReport(eta_s=float(per_job.sum()), per_job=per_job, inversions=pairs)


def _as_assigned(instance: Instance, prediction: PermutationPrediction) -> Assigned:
    if isinstance(prediction, Assigned):
        return prediction
    if instance.m != 1:
        raise ValueError("W_j needs an Assigned prediction on more than one machine")
    return Assigned((tuple(prediction.order),))


def _processed_until(instance: Instance, schedule: Schedule):
    """Return a function t -> processed amount of every job before t."""
    ell = instance.rate_matrix
    starts, ends, jobs, speeds = [], [], [], []
    for segment in schedule.segments:
        starts.append(np.full(segment.jobs.size, segment.start))
        ends.append(np.full(segment.jobs.size, segment.end))
        jobs.append(segment.jobs)
        speeds.append(segment.rates / ell[segment.machines, segment.jobs])
    if not starts:
        return lambda t: np.zeros(instance.n)
    starts, ends = np.concatenate(starts), np.concatenate(ends)
    jobs, speeds = np.concatenate(jobs), np.concatenate(speeds)

    def processed(t: float) -> np.ndarray:
        overlap = np.clip(np.minimum(ends, t) - starts, 0.0, None)
        return np.bincount(jobs, weights=speeds * overlap, minlength=instance.n)

    return processed


def w_contributions(instance: Instance, prediction: PermutationPrediction) -> np.ndarray:
    """
    W_j for every job under the priority schedule of ``prediction``.

    W_j = p_ij Σ_{j' ∈ A(j) behind j} w_j' + w_j (r_j + Σ_{j' ∈ A(j) not behind j} p_ij'(r_j)),
    where i is j's machine and A(j) holds the released, unfinished jobs of i at r_j
    (jobs released together with j count when their id is smaller) plus j itself.
    The W_j sum to the objective of the priority schedule.

    Raises:
        ValueError: If a job is unassigned or a SingleOrder is used on several machines
    """
    assigned = _as_assigned(instance, prediction)
    is_valid, error = validate_prediction(instance, assigned)
    if not is_valid:
        raise ValueError(error)

    n = instance.n
    schedule = priority_schedule(instance, assigned)
    processed = _processed_until(instance, schedule)
    completions = np.asarray(schedule.completions)
    releases = instance.releases
    weights = instance.weights
    processing_times = instance.processing_times
    rates = instance.rate_matrix
    machine_of = assigned.assignment(n)
    ranks = assigned.ranks(n)
    ids = np.arange(n)

    contributions = np.empty(n)
    for release in np.unique(releases):
        remaining = np.maximum(instance.processing - processed(release), 0.0)
        slack = Config.TIME_TOLERANCE * max(1.0, release)
        unfinished = completions > release + slack
        for job in np.flatnonzero(releases == release):
            machine = machine_of[job]
            present = (
                (machine_of == machine)
                & unfinished
                & ((releases < release) | ((releases == release) & (ids <= job)))
            )
            present[job] = True
            behind = present & (ranks > ranks[job])
            ahead = present & ~behind
            # remaining processing time p_ij'(r_j) = ℓ_ij' · p_j'(r_j)
            remaining_times = rates[machine, ahead] * remaining[ahead]
            contributions[job] = processing_times[machine, job] * weights[behind].sum() + weights[job] * (
                release + remaining_times.sum()
            )
    return contributions


def w_contribution(instance: Instance, prediction: PermutationPrediction, job_id: int) -> float:
    """W_j of a single job (see :func:`w_contributions`)."""
    if not 1 <= job_id <= instance.n:
        raise ValueError(f"Unknown job id {job_id}")
    return float(w_contributions(instance, prediction)[job_id - 1])


def reference_prediction(instance: Instance) -> PermutationPrediction:
    """
    Reference prediction σ_ref for η^R.

    True WSPT order for single/identical machines; the Assigned prediction induced by
    clairvoyant MinIncrease P-WSPT for unrelated machines.
    """
    if instance.env.kind is EnvKind.UNRELATED:
        return run_minincrease(instance, record=False).prediction
    return perfect_order(instance)


def eta_r(
    instance: Instance,
    prediction: PermutationPrediction,
    reference: Optional[PermutationPrediction] = None,
) -> ErrorReport:
    """
    η^R = Σ_j W_j(σ̂) − W_j(σ_ref).

    Args:
        instance: Instance with true data
        prediction: Predicted permutation(s)
        reference: Reference prediction (:func:`reference_prediction` when omitted)

    Returns:
        ErrorReport with ``eta_r`` and per-job differences

    Raises:
        ValueError: If the two predictions are of different kinds on several machines
    """
    if reference is None:
        reference = reference_prediction(instance)
    if instance.m > 1 and type(prediction) is not type(reference):
        raise ValueError("Prediction and reference must both be Assigned on several machines")

    per_job = w_contributions(instance, prediction) - w_contributions(instance, reference)
    return ErrorReport(eta_r=float(per_job.sum()), per_job=per_job)


def ell1(processing: Sequence[float], lengths: Sequence[float]) -> float:
    """ℓ1 = Σ_j |p_j − y_j|."""
    processing = np.asarray(processing, dtype=float)
    lengths = np.asarray(lengths, dtype=float)
    if processing.shape != lengths.shape:
        raise ValueError("processing and lengths must have the same size")
    return float(np.abs(processing - lengths).sum())


def spt_objective(lengths: Sequence[float]) -> float:
    """Optimal Σ C_j of unit-weight jobs on one machine (shortest first)."""
    ordered = np.sort(np.asarray(lengths, dtype=float))
    return float(np.dot(np.arange(ordered.size, 0, -1), ordered))


def nu(
    processing: Sequence[float],
    lengths: Sequence[float],
    weights: Optional[Sequence[float]] = None,
) -> float:
    """
    ν = OPT({max(p_j, y_j)}) − OPT({min(p_j, y_j)}) for unit weights on one machine.

    Raises:
        ValueError: If non-unit weights are given
    """
    if weights is not None and np.any(np.asarray(weights, dtype=float) != 1.0):
        raise ValueError("ν is only defined for unit weights")
    processing = np.asarray(processing, dtype=float)
    lengths = np.asarray(lengths, dtype=float)
    if processing.shape != lengths.shape:
        raise ValueError("processing and lengths must have the same size")
    return spt_objective(np.maximum(processing, lengths)) - spt_objective(
        np.minimum(processing, lengths)
    )


# ---------------------------------------------------------------------------
# Dual fitting
# ---------------------------------------------------------------------------


@dataclass(frozen=True, eq=False)
class DualSolution:
    """â_j per job and b̂_it per machine and integer slot t, for scaling parameter s."""

    a: np.ndarray
    b: np.ndarray
    s: float

    @property
    def value(self) -> float:
        return float(self.a.sum() - self.b.sum())


@dataclass(frozen=True, eq=False)
class DualFitReport:
    """Outcome of :func:`dual_fit_verify`."""

    feasible: bool
    identity_holds: bool
    max_violation: float
    violation: Optional[Tuple[int, int, int]]
    dual_value: float
    algorithm_objective: float
    solution: DualSolution

    @property
    def ok(self) -> bool:
        return self.feasible and self.identity_holds


def build_dual_solution(instance: Instance, s: float) -> Tuple[DualSolution, float]:
    """
    Build (â, b̂) from a clairvoyant MinIncrease P-WSPT run.

    â_j = Q_{g(j)j}; b̂_it = Σ w_j over jobs assigned to i with s·t < C_j (unreleased
    jobs included).

    Returns:
        The dual solution and the algorithm's objective
    """
    run = run_minincrease(instance, record=False)
    completions = np.asarray(run.schedule.completions)
    # completions lie on the s-grid; slots t = 0..k_j-1 satisfy s·t < C_j
    slots = np.ceil(completions / s - 1e-9).astype(int)
    horizon = int(slots.max()) + 1

    b = np.zeros((instance.m, horizon))
    for job in range(instance.n):
        b[run.assignment[job], : slots[job]] += instance.weights[job]

    solution = DualSolution(run.q_values.copy(), b, float(s))
    return solution, objective(run.schedule, instance.jobs)


def dual_fit_verify(instance: Instance, s: float, tolerance: float = 1e-6) -> DualFitReport:
    """
    Check the dual-fitting argument for MinIncrease P-WSPT on one instance.

    Verifies Σ â − Σ b̂ = (1 − 1/s)·ALG and that (â/(s+1), b̂/(s+1)) satisfies
    a_j/p_ij ≤ b_it + w_j((t + 1/2)/p_ij + 1/2) for every machine, job and integer
    slot t ≥ r_j. Slots past the last non-zero b̂ only loosen the constraint, so the
    check stops at the first all-zero slot.

    Args:
        instance: Instance whose p_ij and r_j are integer multiples of s
        s: Scaling parameter, s > 1
        tolerance: Relative tolerance of the identity and absolute slack of constraints

    Returns:
        DualFitReport with the most violated (machine, job, slot) triple, 1-based ids

    Raises:
        ValueError: If s ≤ 1 or the instance is off the s-grid
    """
    if not math.isfinite(s) or s <= 1:
        raise ValueError(f"s must be greater than 1, got {s}")
    for job in instance.jobs:
        if not validate_multiple_of(job.release, s):
            raise ValueError(f"Release date of job {job.id} is not a multiple of s")
    for machine, row in enumerate(instance.processing_times):
        for job, value in enumerate(row):
            if not validate_multiple_of(float(value), s):
                raise ValueError(
                    f"Processing time of job {job + 1} on machine {machine + 1} is not a multiple of s"
                )

    solution, algorithm_objective = build_dual_solution(instance, s)
    dual_value = solution.value
    identity_holds = abs(dual_value - (1 - 1 / s) * algorithm_objective) <= tolerance * max(
        1.0, algorithm_objective
    )

    scale = s + 1
    p = instance.processing_times
    weights = instance.weights
    horizon = solution.b.shape[1]
    t = np.arange(horizon, dtype=float)

    max_violation = -np.inf
    worst: Optional[Tuple[int, int, int]] = None
    for job in range(instance.n):
        first_slot = int(math.ceil(instance.releases[job] - 1e-9))
        if first_slot >= horizon:
            slots = np.array([float(first_slot)])
            b = np.zeros((instance.m, 1))
        else:
            slots = t[first_slot:]
            b = solution.b[:, first_slot:]
        lhs = solution.a[job] / scale / p[:, job]
        rhs = b / scale + weights[job] * ((slots[np.newaxis, :] + 0.5) / p[:, job, np.newaxis] + 0.5)
        gap = lhs[:, np.newaxis] - rhs
        machine, slot = np.unravel_index(int(np.argmax(gap)), gap.shape)
        if gap[machine, slot] > max_violation:
            max_violation = float(gap[machine, slot])
            worst = (int(machine) + 1, job + 1, int(slots[slot]))

    feasible = max_violation <= tolerance
    if not feasible:
        logger.warning(f"Dual constraint violated by {max_violation:.3g} at (i, j, t)={worst}")
    return DualFitReport(
        feasible=feasible,
        identity_holds=bool(identity_holds),
        max_violation=max_violation,
        violation=worst if not feasible else None,
        dual_value=dual_value,
        algorithm_objective=algorithm_objective,
        solution=solution,
    )
