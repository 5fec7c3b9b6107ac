"""Tests for the scheduling policies and the policy name parser."""

import numpy as np
import pytest

from services.algorithms import (
    ClairvoyantMinIncrease,
    PolicySpec,
    PreferentialTimeSharing,
    ProportionalFairness,
    PtsConfig,
    RoundRobin,
    WeightedDynamicEquipartition,
    WeightedRoundRobin,
    build_policy,
    clairvoyant_minincrease,
    min_increase_assign,
    parse_policy_name,
    pc_minincrease_unrelated,
    pc_pwspt_identical,
    pc_wspt_single,
    pf_rates,
    pts_combine,
    run_minincrease,
    spread_rates,
    wdeq_rates,
    wrr_rates,
)
from services.errors import eta_s
from services.model import (
    Assigned,
    Instance,
    MachineEnvironment,
    SingleOrder,
    objective,
    perfect_order,
    sequence_objective,
)
from services.simulator import PolicyState, PriorityPolicy, priority_schedule, simulate
from services.verification import random_order
from tests.conftest import random_instance


def state_at_zero(instance: Instance) -> PolicyState:
    return PolicyState(instance, 0.0, np.arange(instance.n), instance.processing.copy())


class TestRateRules:
    def test_wrr_is_proportional_to_weight(self):
        instance = Instance.from_arrays([1, 3], [2, 2])
        np.testing.assert_allclose(wrr_rates(state_at_zero(instance)), [0.25, 0.75])

    def test_wrr_ignores_finished_jobs(self):
        instance = Instance.from_arrays([1, 1, 1, 1], [1, 1, 1, 1])
        state = PolicyState(instance, 0.0, np.array([0, 2]), instance.processing.copy())
        np.testing.assert_allclose(wrr_rates(state), [0.5, 0.0, 0.5, 0.0])

    def test_wdeq_caps_heavy_job(self):
        instance = Instance.from_arrays([3, 1, 1, 1], [1, 1, 1, 1], env=MachineEnvironment.identical(2))
        rates = wdeq_rates(state_at_zero(instance), 2)
        np.testing.assert_allclose(rates, [1.0, 1 / 3, 1 / 3, 1 / 3])

    def test_wdeq_gives_full_rate_when_jobs_fit(self):
        instance = Instance.from_arrays([5, 1], [1, 1], env=MachineEnvironment.identical(3))
        np.testing.assert_allclose(wdeq_rates(state_at_zero(instance), 3), [1.0, 1.0])

    def test_spread_rates_respects_capacities(self):
        job_rates = np.array([2 / 3, 2 / 3, 2 / 3, 0.0])
        z = spread_rates(job_rates, 2)
        np.testing.assert_allclose(z.sum(axis=0), job_rates)
        assert np.all(z.sum(axis=1) <= 1 + 1e-12)
        assert np.count_nonzero(z[:, 1]) == 2

    def test_pf_single_machine_is_weight_proportional(self):
        instance = Instance.from_arrays([2, 1, 1], [1, 1, 1])
        z = pf_rates(state_at_zero(instance))
        np.testing.assert_allclose(z[0], [0.5, 0.25, 0.25])

    def test_pf_single_job_uses_fastest_machine(self):
        instance = Instance.from_arrays([1], [1], env=MachineEnvironment.unrelated([[3.0], [1.5]]))
        z = pf_rates(state_at_zero(instance))
        np.testing.assert_allclose(z[:, 0], [0.0, 1.0], atol=1e-4)
        assert simulate(instance, ProportionalFairness()).completions == pytest.approx((1.5,), rel=1e-4)


class TestNonClairvoyant:
    def test_weighted_round_robin(self):
        instance = Instance.from_arrays([2, 1], [1, 1])
        schedule = simulate(instance, WeightedRoundRobin())
        assert schedule.completions == pytest.approx((1.5, 2.0))

    def test_wdeq_identical_machines(self):
        instance = Instance.from_arrays([1, 1, 1], [1, 1, 1], env=MachineEnvironment.identical(2))
        schedule = simulate(instance, WeightedDynamicEquipartition())
        assert schedule.completions == pytest.approx((1.5, 1.5, 1.5))

    def test_wrr_rejects_several_machines(self):
        instance = Instance.from_arrays([1, 1], [1, 1], env=MachineEnvironment.identical(2))
        with pytest.raises(ValueError):
            simulate(instance, WeightedRoundRobin())

    def test_equipartition_rejects_unrelated_machines(self):
        instance = Instance.from_arrays([1, 1], [1, 1], env=MachineEnvironment.unrelated([[1, 2], [2, 1]]))
        with pytest.raises(ValueError):
            simulate(instance, RoundRobin())

    def test_proportional_fairness_unrelated(self):
        env = MachineEnvironment.unrelated([[1, 4], [4, 1]])
        instance = Instance.from_arrays([1, 1], [1, 1], env=env)
        schedule = simulate(instance, ProportionalFairness())
        assert schedule.completions == pytest.approx((1.0, 1.0), rel=1e-3)

    def test_round_robin_is_two_competitive(self, rng):
        for _ in range(20):
            instance = random_instance(rng, 8, weighted=False)
            opt = sequence_objective(perfect_order(instance).order, instance.weights, instance.processing)
            value = objective(simulate(instance, RoundRobin(), record=False), instance.jobs)
            assert value <= 2 * opt * (1 + 1e-9)


class TestPredictionClairvoyant:
    def test_wspt_equals_opt_plus_error(self, rng):
        for _ in range(20):
            instance = random_instance(rng, 7)
            prediction = random_order(rng, instance.n)
            opt = sequence_objective(perfect_order(instance).order, instance.weights, instance.processing)
            value = objective(pc_wspt_single(instance, prediction), instance.jobs)
            assert value == pytest.approx(opt + eta_s(instance, prediction).eta_s, rel=1e-9)

    def test_wspt_rejects_releases(self):
        instance = Instance.from_arrays([1, 1], [1, 1], [0, 1])
        with pytest.raises(ValueError, match="release"):
            pc_wspt_single(instance, SingleOrder((1, 2)))

    def test_wspt_rejects_several_machines(self):
        instance = Instance.from_arrays([1, 1], [1, 1], env=MachineEnvironment.identical(2))
        with pytest.raises(ValueError, match="single machine"):
            pc_wspt_single(instance, SingleOrder((1, 2)))

    def test_pwspt_rejects_unrelated_and_wrong_m(self):
        unrelated = Instance.from_arrays([1], [1], env=MachineEnvironment.unrelated([[1], [1]]))
        with pytest.raises(ValueError):
            pc_pwspt_identical(unrelated, SingleOrder((1,)))
        identical = Instance.from_arrays([1], [1], env=MachineEnvironment.identical(2))
        with pytest.raises(ValueError):
            pc_pwspt_identical(identical, SingleOrder((1,)), m=3)

    def test_pwspt_runs_top_m(self):
        instance = Instance.from_arrays([1, 1, 1], [1, 2, 1], env=MachineEnvironment.identical(2))
        schedule = pc_pwspt_identical(instance, SingleOrder((3, 2, 1)), m=2)
        assert schedule.completions == pytest.approx((2.0, 2.0, 1.0))

    def test_minincrease_prediction_rejects_unassigned_job(self):
        instance = Instance.from_arrays([1, 1], [1, 1], env=MachineEnvironment.unrelated([[1, 1], [1, 1]]))
        with pytest.raises(ValueError, match="unassigned"):
            pc_minincrease_unrelated(instance, Assigned(((1,), ())))


class TestMinIncrease:
    def test_assign_prefers_fast_machine(self):
        instance = Instance.from_arrays([1], [1], env=MachineEnvironment.unrelated([[1], [2]]))
        choice = min_increase_assign(state_at_zero(instance), 0, np.full(1, -1))
        assert choice.machine == 0
        assert choice.q == pytest.approx(1.0)
        np.testing.assert_allclose(choice.q_values, [1.0, 2.0])

    def test_assign_counts_jobs_behind(self):
        # job 1 (density 1/3) sits on machine 1; job 2 has density 1 and goes ahead of it
        instance = Instance.from_arrays([1, 1], [3, 1], env=MachineEnvironment.unrelated([[1, 1], [1, 10]]))
        assignment = np.array([0, -1])
        choice = min_increase_assign(state_at_zero(instance), 1, assignment)
        np.testing.assert_allclose(choice.q_values, [1.0 + 1.0, 10.0])
        assert choice.machine == 0

    def test_ties_go_to_lowest_machine(self):
        instance = Instance.from_arrays([1], [1], env=MachineEnvironment.unrelated([[2], [2]]))
        assert min_increase_assign(state_at_zero(instance), 0, np.full(1, -1)).machine == 0

    @pytest.mark.parametrize("releases", [False, True])
    def test_q_values_sum_to_objective(self, rng, releases):
        for _ in range(10):
            instance = random_instance(rng, 8, env="unrelated", m=3, releases=releases)
            run = run_minincrease(instance)
            assert run.q_values.sum() == pytest.approx(objective(run.schedule, instance.jobs), rel=1e-7)

    def test_induced_prediction_reproduces_schedule(self, rng):
        instance = random_instance(rng, 10, env="unrelated", m=3, releases=True)
        schedule, prediction = clairvoyant_minincrease(instance)
        replay = priority_schedule(instance, prediction)
        assert replay.completions == pytest.approx(schedule.completions, rel=1e-9)
        assert prediction.job_count() == instance.n

    def test_policy_keeps_assignment(self):
        instance = Instance.from_arrays([1, 1], [1, 1], env=MachineEnvironment.unrelated([[1, 3], [3, 1]]))
        policy = ClairvoyantMinIncrease()
        schedule = simulate(instance, policy)
        assert policy.assignment.tolist() == [0, 1]
        assert schedule.completions == pytest.approx((1.0, 1.0))


class TestPreferentialTimeSharing:
    def test_two_job_example(self):
        instance = Instance.from_arrays([1, 1], [1, 1])
        cfg = PtsConfig(0.5, PriorityPolicy(SingleOrder((1, 2))), WeightedRoundRobin())
        schedule = pts_combine(instance, cfg)
        assert schedule.completions == pytest.approx((4 / 3, 2.0))
        assert objective(schedule, instance.jobs) == pytest.approx(10 / 3)

    def test_perfect_prediction_example(self):
        instance = Instance.from_arrays([1, 1], [1, 2])
        cfg = PtsConfig(0.5, PriorityPolicy(SingleOrder((1, 2))), RoundRobin())
        schedule = pts_combine(instance, cfg)
        assert schedule.completions == pytest.approx((4 / 3, 3.0))
        assert objective(schedule, instance.jobs) == pytest.approx(13 / 3)

    def test_release_is_seen_late(self):
        instance = Instance.from_arrays([1], [1], [1])
        cfg = PtsConfig(0.5, PriorityPolicy(SingleOrder((1,))), WeightedRoundRobin())
        assert pts_combine(instance, cfg).completions == pytest.approx((3.0,))

    def test_sharing_round_robin_with_itself_is_round_robin(self, rng):
        instance = random_instance(rng, 7, weighted=False)
        plain = simulate(instance, RoundRobin())
        shared = pts_combine(instance, PtsConfig(0.5, RoundRobin(), RoundRobin()))
        assert shared.completions == pytest.approx(plain.completions, rel=1e-12)
        assert len(shared.segments) == len(plain.segments)
        for ours, theirs in zip(shared.segments, plain.segments):
            assert (ours.start, ours.end) == pytest.approx((theirs.start, theirs.end), rel=1e-12)
            np.testing.assert_allclose(
                ours.dense(instance.m, instance.n), theirs.dense(instance.m, instance.n), rtol=1e-12
            )

    @pytest.mark.parametrize("lam", [0.1, 0.5, 0.8])
    def test_consistency_and_robustness(self, rng, lam):
        for _ in range(10):
            instance = random_instance(rng, 8)
            opt = sequence_objective(perfect_order(instance).order, instance.weights, instance.processing)
            spec = parse_policy_name(f"pts(wspt,wrr,{lam})")

            perfect = simulate(instance, build_policy(spec, perfect_order(instance)), record=False)
            assert objective(perfect, instance.jobs) <= opt / (1 - lam) * (1 + 1e-9)

            noisy = simulate(instance, build_policy(spec, random_order(rng, instance.n)), record=False)
            assert objective(noisy, instance.jobs) <= 2 / lam * opt * (1 + 1e-9)

    @pytest.mark.parametrize("lam", [0.0, 1.0, -0.5, 2.0])
    def test_invalid_lambda(self, lam):
        with pytest.raises(ValueError):
            PreferentialTimeSharing(RoundRobin(), RoundRobin(), lam)
        with pytest.raises(ValueError):
            PtsConfig(lam, RoundRobin(), RoundRobin())

    def test_name(self):
        policy = PreferentialTimeSharing(PriorityPolicy(SingleOrder((1,))), WeightedRoundRobin(), 0.25)
        assert policy.name == "pts(priority,wrr,0.25)"


class TestPolicyNames:
    @pytest.mark.parametrize("name", ["rr", "wrr", "wdeq", "pf", "wspt", "pwspt", "minincrease"])
    def test_base_names(self, name):
        assert parse_policy_name(name) == PolicySpec(name)

    def test_pts_name_is_normalised(self):
        spec = parse_policy_name(" PTS( wspt , wrr , 0.50 ) ")
        assert spec == PolicySpec("pts", 0.5, "wspt", "wrr")
        assert str(spec) == "pts(wspt,wrr,0.5)"
        assert spec.uses_prediction

    @pytest.mark.parametrize(
        "name",
        ["fifo", "pts(wspt,wrr)", "pts(wspt,foo,0.5)", "pts(wspt,wrr,abc)", "pts(wspt,wrr,1.5)", "pts(pts(wspt,wrr,0.5),rr,0.5)"],
    )
    def test_invalid_names(self, name):
        with pytest.raises(ValueError):
            parse_policy_name(name)

    def test_prediction_policies_need_fitting_prediction(self):
        with pytest.raises(ValueError, match="SingleOrder"):
            build_policy(PolicySpec("wspt"))
        with pytest.raises(ValueError, match="Assigned"):
            build_policy(PolicySpec("minincrease"), SingleOrder((1,)))

    def test_built_policy_carries_name(self):
        assert build_policy(PolicySpec("pwspt"), SingleOrder((1,))).name == "pwspt"
        assert not PolicySpec("rr").uses_prediction
