"""Tests for the domain types and elementary order/objective operations."""

import math

import numpy as np
import pytest

from services.model import (
    Assigned,
    Instance,
    Job,
    LengthPrediction,
    MachineEnvironment,
    Schedule,
    Segment,
    SingleOrder,
    objective,
    perfect_order,
    sequence_objective,
    wspt_order,
)


@pytest.mark.parametrize(
    "weights, lengths, expected",
    [
        ([1, 2, 1], [2, 2, 1], (2, 3, 1)),
        ([1, 1], [1, 1], (1, 2)),
        ([1, 1, 1], [3, 2, 1], (3, 2, 1)),
        ([4, 1], [2, 1], (1, 2)),
    ],
)
def test_wspt_order(weights, lengths, expected):
    assert wspt_order(weights, lengths).order == expected


def test_wspt_order_rejects_non_positive_length():
    with pytest.raises(ValueError):
        wspt_order([1, 1], [1, 0])


def test_instance_from_arrays_assigns_ids():
    instance = Instance.from_arrays([1, 2], [3, 4], [0, 5])
    assert [job.id for job in instance.jobs] == [1, 2]
    assert instance.jobs[1] == Job(2, 2.0, 4.0, 5.0)
    assert instance.n == 2 and instance.m == 1
    assert instance.has_releases


def test_instance_arrays_are_read_only():
    instance = Instance.from_arrays([1, 2], [3, 4])
    with pytest.raises(ValueError):
        instance.weights[0] = 7.0


def test_processing_times_scale_with_rates():
    env = MachineEnvironment.unrelated([[1.0, 2.0], [3.0, 0.5]])
    instance = Instance.from_arrays([1, 1], [2, 4], env=env)
    np.testing.assert_allclose(instance.processing_times, [[2.0, 8.0], [6.0, 2.0]])
    np.testing.assert_allclose(Instance.from_arrays([1], [2]).processing_times, [[2.0]])


def test_with_processing_keeps_everything_else():
    instance = Instance.from_arrays([2, 3], [1, 1], [0, 4], MachineEnvironment.identical(2))
    changed = instance.with_processing([5, 6])
    np.testing.assert_allclose(changed.processing, [5, 6])
    np.testing.assert_allclose(changed.weights, [2, 3])
    np.testing.assert_allclose(changed.releases, [0, 4])
    assert changed.env == instance.env


def test_single_order_ranks():
    np.testing.assert_array_equal(SingleOrder((3, 1, 2)).ranks(), [1, 2, 0])


def test_assigned_lookup():
    prediction = Assigned(((2, 4), (1, 3)))
    assert prediction.machines == 2
    assert prediction.job_count() == 4
    assert prediction.machine_of(4) == 0
    assert prediction.machine_of(1) == 1
    np.testing.assert_array_equal(prediction.assignment(4), [1, 0, 1, 0])
    np.testing.assert_array_equal(prediction.ranks(4), [0, 0, 1, 1])


def test_assigned_unassigned_job_raises():
    prediction = Assigned(((1,), (3,)))
    with pytest.raises(ValueError, match="Job 2"):
        prediction.assignment(3)
    with pytest.raises(ValueError):
        prediction.machine_of(2)


def test_length_prediction_array():
    np.testing.assert_allclose(LengthPrediction((1.0, 0.0)).as_array(), [1.0, 0.0])


def test_sequence_objective():
    assert sequence_objective((1, 2), [1, 1], [2, 1]) == 5.0
    assert sequence_objective((2, 1), [1, 1], [2, 1]) == 4.0


def test_perfect_order_is_wspt_on_true_lengths(two_jobs):
    assert perfect_order(two_jobs).order == (2, 1)


def test_objective_sums_weighted_completions():
    jobs = Instance.from_arrays([1, 3], [1, 1]).jobs
    assert objective(Schedule((), (2.0, 1.0)), jobs) == 5.0


def test_objective_rejects_missing_completion():
    jobs = Instance.from_arrays([1, 1], [1, 1]).jobs
    with pytest.raises(ValueError):
        objective(Schedule((), (1.0, math.nan)), jobs)
    with pytest.raises(ValueError):
        objective(Schedule((), (1.0,)), jobs)


def test_splitting_segments_keeps_work_and_objective():
    instance = Instance.from_arrays([1, 2], [2, 1])
    segments = (
        Segment(0.0, 2.0, np.array([0, 0]), np.array([0, 1]), np.array([0.5, 0.5])),
        Segment(2.0, 3.0, np.array([0]), np.array([0]), np.array([1.0])),
    )
    refined = []
    for segment in segments:
        middle = segment.start + 0.3 * segment.duration
        refined.append(Segment(segment.start, middle, segment.machines, segment.jobs, segment.rates))
        refined.append(Segment(middle, segment.end, segment.machines, segment.jobs, segment.rates))

    def work(parts):
        return sum(part.dense(1, 2).sum(axis=0) * part.duration for part in parts)

    coarse, fine = Schedule(segments, (3.0, 2.0)), Schedule(tuple(refined), (3.0, 2.0))
    np.testing.assert_allclose(work(fine.segments), work(coarse.segments))
    np.testing.assert_allclose(work(fine.segments), instance.processing)
    assert objective(fine, instance.jobs) == objective(coarse, instance.jobs) == 7.0
