"""Tests for the experiment harness."""

from dataclasses import replace

import numpy as np
import pandas as pd
import pytest

from config import Config
from services.algorithms import clairvoyant_minincrease
from services.experiments import (
    CSV_COLUMNS,
    ExperimentConfig,
    baseline_objective,
    emit_csv,
    generate_instance,
    pareto,
    prediction_error,
    records_frame,
    run_experiment,
    run_online_learning,
    run_sensitivity,
    sample_lengths,
    stream,
    summarize,
)
from services.model import Instance, SingleOrder, objective
from services.verification import brute_force_optimum
from tests.conftest import random_instance

SMALL = ExperimentConfig(
    n=20, runs=2, omegas=(0.0, 1.0, 10.0), algorithms=("rr", "pts"), lambdas=(0.1,), seed=3
)


class TestGeneration:
    def test_pareto_support(self):
        samples = pareto(np.random.default_rng(0), 1.1, 1.0, 10_000)
        assert samples.min() >= 1.0

    def test_pareto_mean(self):
        samples = pareto(np.random.default_rng(0), 2.0, 1.0, 10**6)
        assert 1.9 <= samples.mean() <= 2.1

    @pytest.mark.parametrize("distribution", ["pareto", "exponential", "weibull"])
    def test_lengths_are_positive(self, distribution):
        assert np.all(sample_lengths(distribution, np.random.default_rng(1), 500) > 0)

    def test_unknown_distribution(self):
        with pytest.raises(ValueError, match="Unknown distribution"):
            sample_lengths("gamma", np.random.default_rng(0), 3)

    def test_same_seed_same_instance(self):
        first = generate_instance(SMALL, stream(7, 0, 0, 0))
        second = generate_instance(SMALL, stream(7, 0, 0, 0))
        assert first == second
        assert first != generate_instance(SMALL, stream(7, 1, 0, 0))

    def test_single_machine_defaults(self):
        instance = generate_instance(SMALL, stream(0, 0, 0, 0))
        assert instance.n == 20
        assert np.all(instance.weights == 1.0)
        assert not instance.has_releases

    def test_identical_defaults(self):
        cfg = replace(SMALL, env="identical", m=3)
        instance = generate_instance(cfg, stream(0, 0, 0, 0))
        assert instance.m == 3
        assert np.all(instance.releases >= 1.0)
        assert np.all(instance.weights >= 1.0)

    def test_unrelated_rates(self):
        cfg = replace(SMALL, env="unrelated", m=2)
        rates = generate_instance(cfg, stream(0, 0, 0, 0)).rate_matrix
        assert rates.shape == (2, 20)
        assert rates.min() >= 1.0 and rates.max() <= 4.0


class TestBaseline:
    def test_spt_example(self):
        assert baseline_objective(Instance.from_arrays([1, 1], [1, 2])) == pytest.approx(4.0)

    def test_weighted_single_machine_is_optimal(self, rng):
        for _ in range(5):
            instance = random_instance(rng, 6)
            assert baseline_objective(instance) == pytest.approx(brute_force_optimum(instance))

    def test_no_contention(self, rng):
        instance = random_instance(rng, 4, env="identical", m=4, releases=True)
        expected = float(np.dot(instance.weights, instance.releases + instance.processing))
        assert baseline_objective(instance) == pytest.approx(expected)

    def test_unrelated_uses_minincrease(self, rng):
        instance = random_instance(rng, 6, env="unrelated", m=2, releases=True)
        schedule, _ = clairvoyant_minincrease(instance, record=False)
        assert baseline_objective(instance) == pytest.approx(objective(schedule, instance.jobs))


class TestPredictionError:
    def test_unit_weight_single_machine_reports_nu(self, im_family):
        report = prediction_error(im_family, SingleOrder((3, 1, 2)), [1.0, 1.0, 0.0])
        record = report.as_record()
        assert record["eta_r"] is None
        assert (record["eta_s"], record["ell1"], record["nu"]) == pytest.approx((16.0, 9.0, 11.0))

    def test_weighted_instance_has_no_nu(self, rng):
        instance = random_instance(rng, 5)
        report = prediction_error(instance, SingleOrder((1, 2, 3, 4, 5)), instance.processing * 2)
        assert report.nu is None
        assert report.ell1 == pytest.approx(float(instance.processing.sum()))

    def test_assigned_prediction_uses_eta_r(self, rng):
        instance = random_instance(rng, 6, env="unrelated", m=2, releases=True)
        _, induced = clairvoyant_minincrease(instance, record=False)
        report = prediction_error(instance, induced, instance.processing, induced)
        assert report.eta_s is None
        assert report.eta_r == pytest.approx(0.0, abs=1e-9)
        assert report.ell1 == 0.0


class TestSensitivity:
    def test_records(self):
        records = run_sensitivity(SMALL)
        assert len(records) == 3 * 2 * 2

        for run in range(2):
            rr = [r.ratio for r in records if r.algorithm == "rr" and r.run == run]
            assert len(set(rr)) == 1
            assert rr[0] <= 2 + 1e-6

        for record in records:
            if record.algorithm == "pts(wspt,wrr,0.1)" and record.x == 0.0:
                assert record.eta_s == 0.0
                assert record.ell1 == 0.0
                assert record.ratio <= 1 / (1 - 0.1) + 1e-6
            assert record.ratio == pytest.approx(record.objective / record.baseline)

    def test_failed_cells_become_diagnostic_rows(self):
        cfg = ExperimentConfig(
            n=8, env="unrelated", m=2, runs=1, omegas=(0.0,), algorithms=("rr", "minincrease")
        )
        records = {record.algorithm: record for record in run_experiment(cfg)}
        assert records["rr"].objective is None
        assert records["rr"].ratio is None
        assert records["minincrease"].ratio == pytest.approx(1.0)
        assert records["minincrease"].eta_s == pytest.approx(0.0, abs=1e-9)

    def test_bare_pts_expands_per_environment(self):
        cfg = ExperimentConfig(env="identical", m=2, algorithms=("wdeq", "pts"), lambdas=(0.1, 0.5))
        assert [str(spec) for spec in cfg.policy_specs()] == [
            "wdeq",
            "pts(pwspt,wdeq,0.1)",
            "pts(pwspt,wdeq,0.5)",
        ]
        unrelated = replace(cfg, env="unrelated", algorithms=("pts",), lambdas=(0.2,))
        assert [str(spec) for spec in unrelated.policy_specs()] == ["pts(minincrease,pf,0.2)"]

    def test_invalid_config(self):
        with pytest.raises(ValueError):
            run_sensitivity(replace(SMALL, lambdas=(1.5,)))
        with pytest.raises(ValueError, match="Unknown policy"):
            run_sensitivity(replace(SMALL, algorithms=("fifo",)))


class TestOnline:
    def test_rounds(self):
        cfg = ExperimentConfig(
            experiment="online", n=15, runs=1, rounds=3, gamma=1.0, algorithms=("rr", "pts"), lambdas=(0.5,)
        )
        records = run_online_learning(cfg)
        assert len(records) == 3 * 2
        assert sorted({record.x for record in records}) == [0, 1, 2]
        assert cfg.x_values == [0, 1, 2]
        assert all(record.ratio is not None for record in records)

    def test_deterministic(self):
        cfg = ExperimentConfig(experiment="online", n=10, runs=1, rounds=2, gamma=2.0, algorithms=("pts",))
        first = [record.objective for record in run_experiment(cfg)]
        second = [record.objective for record in run_experiment(cfg)]
        assert first == second


class TestOutput:
    def test_csv_layout(self, tmp_path):
        records = run_sensitivity(SMALL)
        path = emit_csv(records, tmp_path / "out" / "sensitivity.csv")
        lines = path.read_text().splitlines()
        assert lines[0] == ",".join(CSV_COLUMNS)
        assert lines[0] == (
            "experiment,distribution,n,m,algorithm,lambda,x,run,seed,objective,baseline,ratio,eta_s,ell1"
        )
        assert len(lines) == len(records) + 1

        frame = pd.read_csv(path)
        assert frame.loc[frame["algorithm"] == "rr", "lambda"].isna().all()
        assert (frame.loc[frame["algorithm"] != "rr", "lambda"] == 0.1).all()

    def test_byte_identical_reruns(self, tmp_path):
        first = emit_csv(run_sensitivity(SMALL), tmp_path / "a.csv").read_bytes()
        second = emit_csv(run_sensitivity(SMALL), tmp_path / "b.csv").read_bytes()
        assert first == second

    def test_empty_records(self, tmp_path):
        with pytest.raises(ValueError):
            emit_csv([], tmp_path / "empty.csv")

    def test_summary(self):
        records = run_sensitivity(SMALL)
        summary = summarize(records)
        assert len(summary) == 2 * 3
        assert (summary["count"] == 2).all()
        assert (summary["ci_low"] <= summary["mean"]).all()
        assert (summary["mean"] <= summary["ci_high"]).all()
        assert summarize(records_frame(records)).equals(summary)


class TestConfigFiles:
    def test_from_file(self, tmp_path):
        path = tmp_path / "run.conf"
        path.write_text(
            "# comment\n"
            "dist = exponential\n"
            "algos = rr, pts(wspt,wrr,0.5)\n"
            "omegas = 0, 1\n"
            "n = 30\n"
            "weighted = yes\n"
        )
        cfg = ExperimentConfig.from_file(path, n=5)
        assert cfg.distribution == "exponential"
        assert cfg.algorithms == ("rr", "pts(wspt,wrr,0.5)")
        assert cfg.omegas == (0.0, 1.0)
        assert cfg.n == 5
        assert cfg.is_weighted
        cfg.validate()

    def test_bad_lines(self, tmp_path):
        path = tmp_path / "bad.conf"
        path.write_text("n 30\n")
        with pytest.raises(ValueError, match="key = value"):
            ExperimentConfig.from_file(path)
        path.write_text("colour = blue\n")
        with pytest.raises(ValueError, match="Unknown config key"):
            ExperimentConfig.from_file(path)

    def test_bundled_configs_are_valid(self):
        paths = sorted(Config.CONFIGS_DIR.glob("*.conf"))
        assert paths
        for path in paths:
            ExperimentConfig.from_file(path).validate()


@pytest.mark.slow
class TestReproduction:
    def test_single_machine_sensitivity(self):
        cfg = ExperimentConfig(n=1000, runs=10, algorithms=("rr", "pts(wspt,rr,0.1)"))
        summary = summarize(run_sensitivity(cfg))
        rr = summary[summary["algorithm"] == "rr"].set_index("x")["mean"]
        pts = summary[summary["algorithm"] == "pts(wspt,rr,0.1)"].set_index("x")["mean"]
        assert pts[0.0] <= 1.15
        assert pts[0.0] < rr[0.0]
        assert all(pts[x] <= rr[x] for x in rr.index if x <= 10)
        assert rr.max() - rr.min() < 0.01 * rr.min()

    def test_online_learning(self):
        cfg = ExperimentConfig(
            experiment="online", n=1000, runs=10, rounds=10, gamma=10.0, algorithms=("rr", "pts(wspt,rr,0.1)")
        )
        frame = records_frame(run_online_learning(cfg))
        medians = frame.groupby(["algorithm", "x"])["ratio"].median()
        assert medians[("pts(wspt,rr,0.1)", 1)] < medians[("rr", 1)]
        errors = frame[frame["algorithm"] == "rr"].groupby("x")["eta_s"].median().sort_index()
        assert errors.iloc[1:].max() <= errors.iloc[0]
        # round to round, up to sampling noise of 2% of the round-0 error
        steps = np.diff(errors.to_numpy())
        assert np.all(steps <= 0.02 * errors.iloc[0])

    def test_identical_machines(self):
        cfg = ExperimentConfig(
            env="identical", m=5, n=1000, runs=10, omegas=(0.0,), algorithms=("wdeq", "pts"), lambdas=(0.1,)
        )
        records = run_sensitivity(cfg)
        summary = summarize(records).set_index("algorithm")["mean"]
        assert summary["pts(pwspt,wdeq,0.1)"] < summary["wdeq"]
        for record in records:
            if record.lam is not None:
                assert record.objective <= 3 / record.lam * record.baseline + 1e-6
