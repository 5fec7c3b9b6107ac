"""
Scheduling policies.

Non-clairvoyant: Round-Robin / Weighted Round-Robin, WDEQ and Proportional Fairness.
Prediction-clairvoyant: WSPT, P-WSPT and MinIncrease P-WSPT driven by a permutation
prediction. Clairvoyant MinIncrease P-WSPT (the reference for unrelated machines) and
the Preferential Time Sharing combiner.
"""

from __future__ import annotations

import re
from dataclasses import dataclass
from typing import List, NamedTuple, Optional, Tuple

import cvxpy as cp
import numpy as np

from config import Config
from services.model import (
    Assigned,
    EnvKind,
    Instance,
    PermutationPrediction,
    Schedule,
    SingleOrder,
)
from services.simulator import Policy, PolicyState, PriorityPolicy, simulate
from utils.logger import setup_logger
from utils.validators import validate_lambda, validate_prediction

logger = setup_logger("services.algorithms")


class SolverError(RuntimeError):
    """Raised when the Proportional Fairness program cannot be solved."""


# ---------------------------------------------------------------------------
# Rate rules
# ---------------------------------------------------------------------------


def wrr_rates(state: PolicyState, weights: Optional[np.ndarray] = None) -> np.ndarray:
    """
    Weighted Round-Robin on a single machine: rates proportional to weight.

    Args:
        state: Current policy state
        weights: Weights to use (the instance weights when omitted)

    Returns:
        Per-job rate vector of length n
    """
    rates = np.zeros(state.n)
    alive = state.alive
    if alive.size == 0:
        return rates
    if weights is None:
        weights = state.instance.weights
    share = weights[alive]
    rates[alive] = share / share.sum()
    return rates


def wdeq_rates(
    state: PolicyState, m: int, weights: Optional[np.ndarray] = None
) -> np.ndarray:
    """
    Weighted dynamic equipartition on m identical machines.

    Capacity m is shared proportionally to weight; a job whose share reaches 1 is
    capped at 1 and the remaining capacity is redistributed among the others.

    Args:
        state: Current policy state
        m: Number of machines
        weights: Weights to use (the instance weights when omitted)

    Returns:
        Per-job rate vector of length n, each rate at most 1, summing to min(m, #alive)
    """
    rates = np.zeros(state.n)
    alive = state.alive
    if alive.size == 0:
        return rates
    if alive.size <= m:
        rates[alive] = 1.0
        return rates
    if weights is None:
        weights = state.instance.weights

    share_weights = weights[alive]
    capped = np.zeros(alive.size, dtype=bool)
    capacity = float(m)
    alive_rates = np.zeros(alive.size)
    for _ in range(m + 1):
        free = np.flatnonzero(~capped)
        shares = capacity * share_weights[free] / share_weights[free].sum()
        saturated = shares >= 1.0
        if not saturated.any():
            alive_rates[free] = shares
            break
        capped[free[saturated]] = True
        capacity -= int(saturated.sum())
    alive_rates[capped] = 1.0
    rates[alive] = alive_rates
    return rates


def spread_rates(job_rates: np.ndarray, m: int) -> np.ndarray:
    """
    Map per-job rates (each at most 1, total at most m) onto m identical machines.

    Jobs are laid out back-to-back on [0, m) (McNaughton wrap-around), so every job
    spans at most two machines and no machine exceeds capacity 1.
    """
    n = job_rates.size
    z = np.zeros((m, n))
    if m == 1:
        z[0] = job_rates
        return z

    jobs = np.flatnonzero(job_rates > 0)
    if jobs.size == 0:
        return z
    rates = job_rates[jobs]
    starts = np.concatenate(([0.0], np.cumsum(rates)[:-1]))
    first = np.minimum(np.floor(starts).astype(int), m - 1)
    head = np.minimum(rates, first + 1 - starts)
    tail = rates - head
    z[first, jobs] = head
    spill = (tail > 0) & (first + 1 < m)
    z[first[spill] + 1, jobs[spill]] = tail[spill]
    return z


def pf_rates(state: PolicyState) -> np.ndarray:
    """
    Proportional Fairness: maximise Σ w_j log(Σ_i z_ij / ℓ_ij) over feasible rates.

    Solved as an Eisenberg–Gale convex program with cvxpy; one machine has the
    closed-form weight-proportional solution.

    Returns:
        The m×n rate matrix

    Raises:
        SolverError: If the solver does not reach an optimal status
    """
    m, n = state.m, state.n
    z = np.zeros((m, n))
    alive = state.alive
    if alive.size == 0:
        return z

    weights = state.instance.weights[alive]
    if m == 1:
        z[0, alive] = weights / weights.sum()
        return z

    inverse_rates = 1.0 / state.instance.rate_matrix[:, alive]
    allocation = cp.Variable((m, alive.size), nonneg=True)
    throughput = cp.sum(cp.multiply(inverse_rates, allocation), axis=0)
    problem = cp.Problem(
        cp.Maximize(weights @ cp.log(throughput)),
        [cp.sum(allocation, axis=1) <= 1, cp.sum(allocation, axis=0) <= 1],
    )
    try:
        problem.solve(
            solver=cp.CLARABEL,
            max_iter=Config.PF_MAX_ITERS,
            tol_gap_abs=Config.PF_TOLERANCE * 1e-2,
            tol_gap_rel=Config.PF_TOLERANCE * 1e-2,
            tol_feas=Config.PF_TOLERANCE * 1e-2,
        )
    except cp.error.SolverError as e:
        raise SolverError(f"Proportional Fairness solver failed at t={state.time}: {e}") from e

    if problem.status not in (cp.OPTIMAL, cp.OPTIMAL_INACCURATE) or allocation.value is None:
        raise SolverError(
            f"Proportional Fairness did not converge at t={state.time}: {problem.status}"
        )
    if problem.status == cp.OPTIMAL_INACCURATE:
        logger.warning(f"Proportional Fairness solution inaccurate at t={state.time}")

    solution = np.clip(allocation.value, 0.0, None)
    # project solver slack back onto the capacity constraints
    solution /= np.maximum(solution.sum(axis=1, keepdims=True), 1.0)
    solution /= np.maximum(solution.sum(axis=0, keepdims=True), 1.0)
    z[:, alive] = solution
    return z


# ---------------------------------------------------------------------------
# Non-clairvoyant policies
# ---------------------------------------------------------------------------


class WeightedDynamicEquipartition(Policy):
    """WDEQ on identical machines (WRR when there is a single machine)."""

    name = "wdeq"
    weighted = True

    def reset(self, instance: Instance) -> None:
        if instance.env.kind is EnvKind.UNRELATED and instance.m > 1:
            raise ValueError(f"{self.name} needs a single or identical machine environment")

    def schedule(self, state: PolicyState) -> np.ndarray:
        weights = None if self.weighted else np.ones(state.n)
        return spread_rates(wdeq_rates(state, state.m, weights), state.m)


class WeightedRoundRobin(WeightedDynamicEquipartition):
    """Weight-proportional rates on a single machine."""

    name = "wrr"

    def reset(self, instance: Instance) -> None:
        if instance.m != 1:
            raise ValueError("wrr needs a single machine; use wdeq on identical machines")

    def schedule(self, state: PolicyState) -> np.ndarray:
        return wrr_rates(state)[np.newaxis, :]


class RoundRobin(WeightedDynamicEquipartition):
    """Equal rates for all alive jobs (equipartition on identical machines)."""

    name = "rr"
    weighted = False


class ProportionalFairness(Policy):
    """Eisenberg–Gale rate allocation, re-solved at every event."""

    name = "pf"

    def schedule(self, state: PolicyState) -> np.ndarray:
        return pf_rates(state)


# ---------------------------------------------------------------------------
# Clairvoyant MinIncrease P-WSPT
# ---------------------------------------------------------------------------


class MachineChoice(NamedTuple):
    """Outcome of a MinIncrease assignment decision."""

    machine: int
    q: float
    q_values: np.ndarray


def _precedes(densities: np.ndarray, others: np.ndarray, job: int) -> np.ndarray:
    """Mask of ``others`` ahead of ``job`` in WSPT priority (density, then id)."""
    return (densities[others] > densities[job]) | (
        (densities[others] == densities[job]) & (others < job)
    )


def min_increase_assign(
    state: PolicyState, job: int, assignment: np.ndarray
) -> MachineChoice:
    """
    Choose the machine on which job ``job`` increases the P-WSPT objective least.

    Q_ij = w_j (r_j + p_ij + Σ_{j' ∈ H} p_ij'(r_j)) + p_ij Σ_{j' ∈ L} w_j', where H and L
    split the available jobs already assigned to machine i into those ahead of and
    behind j in the machine's WSPT priority.

    Args:
        state: Policy state at r_j (``remaining`` gives p_j'(r_j))
        job: Job index (``id - 1``)
        assignment: Machine index of every job, -1 for unassigned jobs

    Returns:
        Chosen 0-based machine (ties to the lowest index), its Q value and all Q values
    """
    instance = state.instance
    weights = instance.weights
    processing_times = instance.processing_times
    remaining_times = state.remaining_times()
    release = instance.releases[job]

    q_values = np.empty(instance.m)
    alive = state.alive
    for machine in range(instance.m):
        on_machine = alive[(assignment[alive] == machine) & (alive != job)]
        densities = weights / processing_times[machine]
        ahead = _precedes(densities, on_machine, job)
        p_ij = processing_times[machine, job]
        q_values[machine] = weights[job] * (
            release + p_ij + remaining_times[machine, on_machine[ahead]].sum()
        ) + p_ij * weights[on_machine[~ahead]].sum()

    machine = int(np.argmin(q_values))
    return MachineChoice(machine, float(q_values[machine]), q_values)


class ClairvoyantMinIncrease(Policy):
    """
    Clairvoyant MinIncrease P-WSPT for unrelated machines.

    Every job is assigned at its release via :func:`min_increase_assign` using true
    processing times; each machine runs its assigned available job of highest density
    μ_ij = w_j / p_ij (ties by id).
    """

    name = "clairvoyant-minincrease"

    def __init__(self) -> None:
        self.assignment: Optional[np.ndarray] = None
        self.q_values: Optional[np.ndarray] = None
        self._priority: Optional[np.ndarray] = None

    def reset(self, instance: Instance) -> None:
        self.assignment = np.full(instance.n, -1, dtype=int)
        self.q_values = np.full(instance.n, np.nan)
        densities = instance.weights[np.newaxis, :] / instance.processing_times
        ids = np.arange(instance.n)
        # rank of every job in every machine's WSPT priority
        self._priority = np.empty((instance.m, instance.n), dtype=int)
        for machine in range(instance.m):
            order = np.lexsort((ids, -densities[machine]))
            self._priority[machine, order] = np.arange(instance.n)

    def schedule(self, state: PolicyState) -> np.ndarray:
        alive = state.alive
        for job in alive[self.assignment[alive] < 0]:
            choice = min_increase_assign(state, int(job), self.assignment)
            self.assignment[job] = choice.machine
            self.q_values[job] = choice.q

        z = np.zeros((state.m, state.n))
        machines = self.assignment[alive]
        for machine in np.unique(machines):
            candidates = alive[machines == machine]
            chosen = candidates[np.argmin(self._priority[machine, candidates])]
            z[machine, chosen] = 1.0
        return z

    def induced_prediction(self, instance: Instance) -> Assigned:
        """Per-machine WSPT orders of the jobs this run assigned to each machine."""
        orders = []
        for machine in range(instance.m):
            jobs = np.flatnonzero(self.assignment == machine)
            jobs = jobs[np.argsort(self._priority[machine, jobs])]
            orders.append(tuple(int(job) + 1 for job in jobs))
        return Assigned(tuple(orders))


@dataclass(frozen=True, eq=False)
class MinIncreaseRun:
    """Schedule of clairvoyant MinIncrease with its assignment and Q values."""

    schedule: Schedule
    prediction: Assigned
    assignment: np.ndarray
    q_values: np.ndarray


def run_minincrease(instance: Instance, record: bool = True) -> MinIncreaseRun:
    """Run clairvoyant MinIncrease P-WSPT and keep the assignment decisions."""
    policy = ClairvoyantMinIncrease()
    schedule = simulate(instance, policy, record=record)
    return MinIncreaseRun(
        schedule,
        policy.induced_prediction(instance),
        policy.assignment.copy(),
        policy.q_values.copy(),
    )


def clairvoyant_minincrease(
    instance: Instance, record: bool = True
) -> Tuple[Schedule, Assigned]:
    """
    Clairvoyant MinIncrease P-WSPT.

    Returns:
        The schedule and the induced Assigned prediction (per-machine WSPT orders),
        which reproduces the same schedule when used as a priority prediction
    """
    run = run_minincrease(instance, record=record)
    return run.schedule, run.prediction


# ---------------------------------------------------------------------------
# Prediction-clairvoyant algorithms
# ---------------------------------------------------------------------------


def pc_wspt_single(instance: Instance, prediction: SingleOrder, record: bool = True) -> Schedule:
    """
    Prediction-clairvoyant WSPT: run jobs back-to-back in predicted order.

    Raises:
        ValueError: If the instance has more than one machine or a non-zero release date
    """
    if instance.m != 1:
        raise ValueError("Prediction-clairvoyant WSPT needs a single machine")
    if instance.has_releases:
        raise ValueError("Prediction-clairvoyant WSPT needs zero release dates")
    return simulate(instance, PriorityPolicy(prediction), record=record)


def pc_pwspt_identical(
    instance: Instance,
    prediction: SingleOrder,
    m: Optional[int] = None,
    record: bool = True,
) -> Schedule:
    """
    Prediction-clairvoyant P-WSPT: at any time run the m available jobs ranked highest.

    Raises:
        ValueError: If the environment is not single/identical or ``m`` disagrees with it
    """
    if instance.env.kind is EnvKind.UNRELATED:
        raise ValueError("P-WSPT needs identical machines")
    if m is not None and m != instance.m:
        raise ValueError(f"Instance has {instance.m} machines, got m={m}")
    return simulate(instance, PriorityPolicy(prediction), record=record)


def pc_minincrease_unrelated(
    instance: Instance, prediction: Assigned, record: bool = True
) -> Schedule:
    """
    Prediction-clairvoyant MinIncrease P-WSPT: follow the predicted assignment and orders.

    Raises:
        ValueError: If a job is unassigned
    """
    is_valid, error = validate_prediction(instance, prediction)
    if not is_valid:
        raise ValueError(error)
    return simulate(instance, PriorityPolicy(prediction), record=record)


# ---------------------------------------------------------------------------
# Preferential Time Sharing
# ---------------------------------------------------------------------------


class PreferentialTimeSharing(Policy):
    """
    Time sharing of a prediction-clairvoyant policy A and a non-clairvoyant policy B.

    A receives a (1-λ) share and B a λ share of every machine at every instant. A job
    becomes visible to A at real time r_j/(1-λ) and to B at r_j/λ; both see the shared
    true remaining processing and lose the job when it completes.
    """

    def __init__(self, clairvoyant: Policy, non_clairvoyant: Policy, lam: float):
        is_valid, error = validate_lambda(lam)
        if not is_valid:
            raise ValueError(error)
        self.clairvoyant = clairvoyant
        self.non_clairvoyant = non_clairvoyant
        self.lam = float(lam)
        self.name = f"pts({clairvoyant.name},{non_clairvoyant.name},{lam:g})"

    def reset(self, instance: Instance) -> None:
        self.clairvoyant.reset(instance)
        self.non_clairvoyant.reset(instance)

    def _views(self, state: PolicyState):
        releases = state.instance.releases[state.alive]
        slack = Config.TIME_TOLERANCE * np.maximum(1.0, releases)
        shares = ((1.0 - self.lam, self.clairvoyant), (self.lam, self.non_clairvoyant))
        for share, policy in shares:
            visible = state.alive[share * state.time + slack >= releases]
            yield share, policy, state.restrict(visible, share * state.time)

    def schedule(self, state: PolicyState) -> np.ndarray:
        z = np.zeros((state.m, state.n))
        for share, policy, view in self._views(state):
            if view.alive.size:
                z += share * np.asarray(policy.schedule(view), dtype=float)
        return z

    def next_internal_event(self, state: PolicyState) -> Optional[float]:
        releases = state.instance.releases
        slack = Config.TIME_TOLERANCE * max(1.0, state.time)
        candidates: List[float] = []
        for share in (1.0 - self.lam, self.lam):
            virtual = releases / share
            upcoming = virtual[virtual > state.time + slack]
            if upcoming.size:
                candidates.append(float(upcoming.min()))
        for share, policy, view in self._views(state):
            if view.alive.size:
                epoch = policy.next_internal_event(view)
                if epoch is not None:
                    candidates.append(epoch / share)
        return min(candidates) if candidates else None


@dataclass(frozen=True)
class PtsConfig:
    """Preferential Time Sharing parameters: λ, policy A (clairvoyant) and B."""

    lam: float
    clairvoyant: Policy
    non_clairvoyant: Policy

    def __post_init__(self) -> None:
        is_valid, error = validate_lambda(self.lam)
        if not is_valid:
            raise ValueError(error)


def pts_combine(instance: Instance, cfg: PtsConfig, record: bool = True) -> Schedule:
    """
    Run Preferential Time Sharing of ``cfg.clairvoyant`` and ``cfg.non_clairvoyant``.

    Raises:
        ValueError: If λ is outside (0, 1)
    """
    policy = PreferentialTimeSharing(cfg.clairvoyant, cfg.non_clairvoyant, cfg.lam)
    return simulate(instance, policy, record=record)


# ---------------------------------------------------------------------------
# Policy names
# ---------------------------------------------------------------------------

BASE_POLICIES = ("rr", "wrr", "wdeq", "pf", "wspt", "pwspt", "minincrease")
PREDICTION_POLICIES = ("wspt", "pwspt", "minincrease")
_PTS_PATTERN = re.compile(r"^pts\((?P<a>[a-z]+),(?P<b>[a-z]+),(?P<lam>[^)]+)\)$")


@dataclass(frozen=True)
class PolicySpec:
    """Parsed canonical policy name."""

    kind: str
    lam: Optional[float] = None
    clairvoyant: Optional[str] = None
    non_clairvoyant: Optional[str] = None

    def __str__(self) -> str:
        if self.kind == "pts":
            return f"pts({self.clairvoyant},{self.non_clairvoyant},{self.lam:g})"
        return self.kind

    @property
    def uses_prediction(self) -> bool:
        if self.kind == "pts":
            return True
        return self.kind in PREDICTION_POLICIES


def parse_policy_name(name: str) -> PolicySpec:
    """
    Parse ``rr``, ``wrr``, ``wdeq``, ``pf``, ``wspt``, ``pwspt``, ``minincrease`` or
    ``pts(<A>,<B>,<λ>)``.

    Raises:
        ValueError: On an unknown name, a nested pts or λ outside (0, 1)
    """
    cleaned = name.strip().lower().replace(" ", "")
    if cleaned in BASE_POLICIES:
        return PolicySpec(cleaned)

    match = _PTS_PATTERN.match(cleaned)
    if not match:
        raise ValueError(f"Unknown policy name: {name!r}")

    clairvoyant, non_clairvoyant = match.group("a"), match.group("b")
    for part in (clairvoyant, non_clairvoyant):
        if part not in BASE_POLICIES:
            raise ValueError(f"Unknown policy name inside pts: {part!r}")
    try:
        lam = float(match.group("lam"))
    except ValueError:
        raise ValueError(f"Invalid λ in {name!r}") from None
    is_valid, error = validate_lambda(lam)
    if not is_valid:
        raise ValueError(error)
    return PolicySpec("pts", lam, clairvoyant, non_clairvoyant)


def build_policy(
    spec: PolicySpec, prediction: Optional[PermutationPrediction] = None
) -> Policy:
    """
    Instantiate a fresh policy for one simulation.

    Args:
        spec: Parsed policy name
        prediction: Permutation prediction for prediction-clairvoyant policies

    Returns:
        Policy instance

    Raises:
        ValueError: If a prediction-clairvoyant policy lacks a fitting prediction
    """
    if spec.kind == "pts":
        return PreferentialTimeSharing(
            build_policy(PolicySpec(spec.clairvoyant), prediction),
            build_policy(PolicySpec(spec.non_clairvoyant), prediction),
            spec.lam,
        )
    if spec.kind == "rr":
        return RoundRobin()
    if spec.kind == "wrr":
        return WeightedRoundRobin()
    if spec.kind == "wdeq":
        return WeightedDynamicEquipartition()
    if spec.kind == "pf":
        return ProportionalFairness()

    if spec.kind in ("wspt", "pwspt") and not isinstance(prediction, SingleOrder):
        raise ValueError(f"{spec.kind} needs a SingleOrder prediction")
    if spec.kind == "minincrease" and not isinstance(prediction, Assigned):
        raise ValueError("minincrease needs an Assigned prediction")
    policy = PriorityPolicy(prediction)
    policy.name = spec.kind
    return policy
