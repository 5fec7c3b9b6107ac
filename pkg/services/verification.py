"""
Property suites behind ``predsched verify``.

Each check draws random instances from a fixed seed sequence and reports the seed of
the first failing trial, so a failure can be replayed in isolation.
"""

from __future__ import annotations

import itertools
import math
import time
from dataclasses import dataclass
from functools import partial
from typing import Callable, Dict, List, Optional

import numpy as np

from config import Config
from services.algorithms import (
    PreferentialTimeSharing,
    ProportionalFairness,
    RoundRobin,
    WeightedDynamicEquipartition,
    WeightedRoundRobin,
    pc_pwspt_identical,
    pc_wspt_single,
)
from services.errors import dual_fit_verify, eta_r, eta_s, ell1, w_contributions
from services.learn import NoiseMode, SampleSet, erm_learn, length_to_permutation, perturb_lengths
from services.model import (
    Assigned,
    Instance,
    MachineEnvironment,
    SingleOrder,
    objective,
    perfect_order,
    sequence_objective,
)
from services.simulator import Policy, PriorityPolicy, priority_schedule, simulate
from utils.logger import log_check_result, setup_logger

logger = setup_logger("services.verification")

SUITES = ("lemmas", "dual", "props", "all")
DUAL_SCALE = 1 + math.sqrt(2)

Trial = Callable[[np.random.Generator], Optional[str]]


@dataclass(frozen=True)
class Check:
    """A named property evaluated on ``trials`` random cases."""

    name: str
    trials: int
    trial: Trial


@dataclass(frozen=True)
class CheckResult:
    name: str
    suite: str
    trials: int
    failures: int
    first_failure_seed: Optional[int]
    detail: str
    elapsed: float

    @property
    def passed(self) -> bool:
        return self.failures == 0


# ---------------------------------------------------------------------------
# Random cases
# ---------------------------------------------------------------------------


def random_single(
    rng: np.random.Generator, n_max: int, weighted: bool = True, releases: bool = False
) -> Instance:
    n = int(rng.integers(1, n_max + 1))
    weights = rng.uniform(0.5, 5.0, n) if weighted else np.ones(n)
    processing = rng.uniform(0.1, 10.0, n)
    release = rng.uniform(0.0, 10.0, n) if releases else np.zeros(n)
    return Instance.from_arrays(weights, processing, release)


def random_identical(rng: np.random.Generator, n_max: int, m: int, releases: bool = True) -> Instance:
    n = int(rng.integers(1, n_max + 1))
    weights = 1.0 + rng.pareto(2.0, n)
    processing = 1.0 + rng.pareto(1.1, n)
    release = 1.0 + rng.pareto(2.0, n) if releases else np.zeros(n)
    return Instance.from_arrays(weights, processing, release, MachineEnvironment.identical(m))


def random_unrelated(rng: np.random.Generator, n_max: int, m_max: int) -> Instance:
    n = int(rng.integers(1, n_max + 1))
    m = int(rng.integers(1, m_max + 1))
    rates = rng.uniform(1.0, 4.0, (m, n))
    return Instance.from_arrays(
        rng.uniform(0.5, 5.0, n),
        rng.uniform(0.1, 10.0, n),
        rng.uniform(0.0, 10.0, n),
        MachineEnvironment.unrelated(rates),
    )


def random_order(rng: np.random.Generator, n: int) -> SingleOrder:
    return SingleOrder(tuple(int(job) + 1 for job in rng.permutation(n)))


def random_assigned(rng: np.random.Generator, n: int, m: int) -> Assigned:
    machines = rng.integers(0, m, n)
    order = rng.permutation(n)
    return Assigned(
        tuple(tuple(int(job) + 1 for job in order if machines[job] == machine) for machine in range(m))
    )


def grid_instance(rng: np.random.Generator, s: float) -> Instance:
    """Unrelated instance with p_j, r_j ∈ s·{1..10} and ℓ_ij ∈ {1, 2, 3}."""
    n = int(rng.integers(1, 21))
    m = int(rng.integers(1, 5))
    return Instance.from_arrays(
        rng.integers(1, 6, n).astype(float),
        s * rng.integers(1, 11, n),
        s * rng.integers(1, 11, n),
        MachineEnvironment.unrelated(rng.integers(1, 4, (m, n)).astype(float)),
    )


def brute_force_optimum(instance: Instance) -> float:
    """Best Σ w_j C_j over all sequences of a single machine without releases."""
    perms = np.array(list(itertools.permutations(range(instance.n))))
    completions = np.cumsum(instance.processing[perms], axis=1)
    return float((instance.weights[perms] * completions).sum(axis=1).min())


def _close(value: float, expected: float, relative: float) -> bool:
    return abs(value - expected) <= relative * max(1.0, abs(expected))


# ---------------------------------------------------------------------------
# Lemmas
# ---------------------------------------------------------------------------


def _smith_rule(rng: np.random.Generator) -> Optional[str]:
    instance = random_single(rng, 8)
    wspt = sequence_objective(perfect_order(instance).order, instance.weights, instance.processing)
    best = brute_force_optimum(instance)
    if not _close(wspt, best, 1e-9):
        return f"WSPT {wspt} differs from optimum {best}"
    return None


def _wspt_equals_opt_plus_error(rng: np.random.Generator) -> Optional[str]:
    instance = random_single(rng, 50)
    prediction = random_order(rng, instance.n)
    value = objective(pc_wspt_single(instance, prediction, record=False), instance.jobs)
    optimum = sequence_objective(perfect_order(instance).order, instance.weights, instance.processing)
    error = eta_s(instance, prediction, collect_pairs=False).eta_s
    if not _close(value, optimum + error, 1e-9):
        return f"objective {value} != OPT {optimum} + η^S {error}"
    return None


def _pts_single_bound(rng: np.random.Generator) -> Optional[str]:
    instance = random_single(rng, 50)
    prediction = random_order(rng, instance.n)
    optimum = sequence_objective(perfect_order(instance).order, instance.weights, instance.processing)
    error = eta_s(instance, prediction, collect_pairs=False).eta_s
    for lam in (0.1, 0.5, 0.9):
        policy = PreferentialTimeSharing(PriorityPolicy(prediction), WeightedRoundRobin(), lam)
        value = objective(simulate(instance, policy, record=False), instance.jobs)
        bound = min((1 + error / optimum) / (1 - lam), 2 / lam) * optimum
        if value > bound + 1e-6 * max(1.0, bound):
            return f"λ={lam}: objective {value} exceeds {bound}"
    return None


def _pwspt_error_dependence(rng: np.random.Generator) -> Optional[str]:
    m = int(rng.choice([2, 5]))
    instance = random_identical(rng, 200, m)
    prediction = random_order(rng, instance.n)
    value = objective(pc_pwspt_identical(instance, prediction, record=False), instance.jobs)

    weights, processing = instance.weights, instance.processing
    order = np.asarray(perfect_order(instance).order) - 1
    prefix = np.cumsum(processing[order])
    queueing = float(np.dot(weights[order], prefix))
    error = eta_s(instance, prediction, collect_pairs=False).eta_s
    bound = float(np.dot(weights, instance.releases + processing)) + (queueing + error) / m
    if value > bound + 1e-6 * max(1.0, bound):
        return f"objective {value} exceeds {bound}"
    return None


def _round_robin_two_competitive(rng: np.random.Generator) -> Optional[str]:
    instance = random_single(rng, 40, weighted=False)
    value = objective(simulate(instance, RoundRobin(), record=False), instance.jobs)
    optimum = sequence_objective(perfect_order(instance).order, instance.weights, instance.processing)
    if value > 2 * optimum + 1e-6 * max(1.0, optimum):
        return f"RR {value} exceeds 2·OPT {2 * optimum}"
    return None


def _eta_r_equals_eta_s(rng: np.random.Generator) -> Optional[str]:
    instance = random_single(rng, 30)
    prediction = random_order(rng, instance.n)
    expected = eta_s(instance, prediction, collect_pairs=False).eta_s
    value = eta_r(instance, prediction, perfect_order(instance)).eta_r
    scale = sequence_objective(perfect_order(instance).order, instance.weights, instance.processing)
    if abs(value - expected) > 1e-9 * max(1.0, scale):
        return f"η^R {value} != η^S {expected}"
    return None


# ---------------------------------------------------------------------------
# Properties
# ---------------------------------------------------------------------------


def _eta_s_length_bound(rng: np.random.Generator, weighted: bool = False) -> Optional[str]:
    # with unit weights the bound reads η^S ≤ n·ℓ1
    instance = random_single(rng, 40, weighted=weighted)
    y = perturb_lengths(instance.processing, NoiseMode.FIXED, float(rng.uniform(0, 5)), rng)
    error = eta_s(instance, length_to_permutation(instance.weights, y), collect_pairs=False).eta_s
    bound = float(instance.weights.sum()) * ell1(instance.processing, y.as_array())
    if error > bound + 1e-9 * max(1.0, bound):
        return f"η^S {error} exceeds (Σw)·ℓ1 {bound}"
    return None


def _decomposition(rng: np.random.Generator) -> Optional[str]:
    kind = int(rng.integers(0, 3))
    if kind == 0:
        instance = random_single(rng, 25, releases=True)
        prediction = random_order(rng, instance.n)
    elif kind == 1:
        instance = random_identical(rng, 25, int(rng.integers(1, 4)))
        prediction = random_assigned(rng, instance.n, instance.m)
    else:
        instance = random_unrelated(rng, 25, 3)
        prediction = random_assigned(rng, instance.n, instance.m)
    value = objective(priority_schedule(instance, prediction, record=False), instance.jobs)
    total = float(w_contributions(instance, prediction).sum())
    if not _close(total, value, 1e-6):
        return f"Σ W_j {total} != objective {value}"
    return None


def _erm_optimality(rng: np.random.Generator) -> Optional[str]:
    n = int(rng.integers(1, 7))
    z = int(rng.integers(1, 6))
    weights = rng.uniform(0.5, 5.0, n)
    samples = SampleSet(
        tuple(Instance.from_arrays(weights, rng.uniform(0.1, 10.0, n)) for _ in range(z))
    )
    learned = erm_learn(samples).order

    # with shared weights the mean objective of an order is its objective on the mean lengths
    mean_lengths = samples.average_instance().processing
    perms = np.array(list(itertools.permutations(range(n))))
    values = (weights[perms] * np.cumsum(mean_lengths[perms], axis=1)).sum(axis=1)
    learned_value = sequence_objective(learned, weights, mean_lengths)
    if learned_value > values.min() + 1e-9 * max(1.0, values.min()):
        return f"ERM order {learned} is not optimal"
    return None


def _shrunk(instance: Instance, rng: np.random.Generator) -> Instance:
    # every p_j scaled by a factor in (0, 1]
    factors = 1.0 - rng.random(instance.n)
    return instance.with_processing(instance.processing * factors)


def _monotone(
    make_instance: Callable[[np.random.Generator], Instance],
    make_policy: Callable[[Instance, np.random.Generator], Policy],
    tolerance: float = 1e-6,
) -> Trial:
    def trial(rng: np.random.Generator) -> Optional[str]:
        instance = make_instance(rng)
        policy_seed = int(rng.integers(0, 2**31))
        shrunk = _shrunk(instance, rng)
        before = objective(
            simulate(instance, make_policy(instance, np.random.default_rng(policy_seed)), record=False),
            instance.jobs,
        )
        after = objective(
            simulate(shrunk, make_policy(shrunk, np.random.default_rng(policy_seed)), record=False),
            shrunk.jobs,
        )
        if after > before + tolerance * max(1.0, before):
            return f"objective grew from {before} to {after} after shrinking"
        return None

    return trial


def _monotonicity_checks(trials: int) -> List[Check]:
    single = partial(random_single, n_max=15)
    unrelated = partial(random_unrelated, n_max=4, m_max=2)
    unrelated_any = partial(random_unrelated, n_max=15, m_max=3)

    def identical(rng: np.random.Generator) -> Instance:
        return random_identical(rng, 15, int(rng.integers(2, 4)))

    return [
        Check("monotone-rr", trials, _monotone(single, lambda i, r: RoundRobin())),
        Check("monotone-wrr", trials, _monotone(single, lambda i, r: WeightedRoundRobin())),
        Check("monotone-wdeq", trials, _monotone(identical, lambda i, r: WeightedDynamicEquipartition())),
        Check("monotone-pf", trials, _monotone(unrelated, lambda i, r: ProportionalFairness(), 1e-4)),
        Check("monotone-wspt", trials, _monotone(single, lambda i, r: PriorityPolicy(random_order(r, i.n)))),
        Check("monotone-pwspt", trials, _monotone(identical, lambda i, r: PriorityPolicy(random_order(r, i.n)))),
        Check(
            "monotone-minincrease",
            trials,
            _monotone(unrelated_any, lambda i, r: PriorityPolicy(random_assigned(r, i.n, i.m))),
        ),
        Check(
            "monotone-pts",
            trials,
            _monotone(
                single,
                lambda i, r: PreferentialTimeSharing(
                    PriorityPolicy(random_order(r, i.n)), WeightedRoundRobin(), 0.5
                ),
            ),
        ),
        Check(
            "monotone-pts-identical",
            trials,
            _monotone(
                identical,
                lambda i, r: PreferentialTimeSharing(
                    PriorityPolicy(random_order(r, i.n)), WeightedDynamicEquipartition(), 0.3
                ),
            ),
        ),
    ]


# ---------------------------------------------------------------------------
# Dual fitting
# ---------------------------------------------------------------------------


def _dual_fit(rng: np.random.Generator) -> Optional[str]:
    instance = grid_instance(rng, DUAL_SCALE)
    report = dual_fit_verify(instance, DUAL_SCALE)
    if not report.identity_holds:
        return (
            f"dual value {report.dual_value} != (1 - 1/s)·{report.algorithm_objective}"
        )
    if not report.feasible:
        return f"constraint (i, j, t)={report.violation} violated by {report.max_violation}"
    return None


# ---------------------------------------------------------------------------
# Runner
# ---------------------------------------------------------------------------


def suite_checks(suite: str, scale: Optional[float] = None) -> List[Check]:
    """
    Checks of a suite with trial counts multiplied by ``scale``.

    Raises:
        ValueError: On an unknown suite name
    """
    if suite not in SUITES:
        raise ValueError(f"Unknown suite: {suite}")
    if scale is None:
        scale = Config.VERIFY_TRIALS_SCALE

    def count(trials: int) -> int:
        return max(1, int(round(trials * scale)))

    checks: Dict[str, List[Check]] = {
        "lemmas": [
            Check("smith-rule", count(200), _smith_rule),
            Check("wspt-opt-plus-error", count(1000), _wspt_equals_opt_plus_error),
            Check("pts-single-bound", count(100), _pts_single_bound),
            Check("pwspt-error-dependence", count(500), _pwspt_error_dependence),
            Check("rr-two-competitive", count(500), _round_robin_two_competitive),
            Check("eta-r-equals-eta-s", count(500), _eta_r_equals_eta_s),
        ],
        "dual": [Check("dual-fit", count(50), _dual_fit)],
        "props": [
            Check("eta-s-length-bound", count(1000), _eta_s_length_bound),
            Check("eta-s-weighted-length-bound", count(500), partial(_eta_s_length_bound, weighted=True)),
            Check("decomposition", count(200), _decomposition),
            Check("erm-optimality", count(100), _erm_optimality),
            *_monotonicity_checks(count(500)),
        ],
    }
    if suite == "all":
        return checks["lemmas"] + checks["dual"] + checks["props"]
    return checks[suite]


def run_check(check: Check, suite: str, seed: int = 0) -> CheckResult:
    """Run every trial of a check; trial k uses seed ``seed + k``."""
    started = time.perf_counter()
    failures = 0
    first_seed: Optional[int] = None
    detail = ""
    for trial in range(check.trials):
        trial_seed = seed + trial
        message = check.trial(np.random.default_rng(trial_seed))
        if message is not None:
            failures += 1
            if first_seed is None:
                first_seed, detail = trial_seed, message
    result = CheckResult(
        check.name, suite, check.trials, failures, first_seed, detail, time.perf_counter() - started
    )
    log_check_result(logger, suite, result)
    return result


def run_suite(suite: str, seed: int = 0, scale: Optional[float] = None) -> List[CheckResult]:
    """Run a named suite (``lemmas``, ``dual``, ``props`` or ``all``)."""
    suites = ("lemmas", "dual", "props") if suite == "all" else (suite,)
    results: List[CheckResult] = []
    for name in suites:
        for check in suite_checks(name, scale):
            results.append(run_check(check, name, seed))
    return results
