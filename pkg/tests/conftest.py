"""Shared fixtures for the predsched test suite."""

import math

import numpy as np
import pytest

from services.model import Instance, MachineEnvironment

DUAL_SCALE = 1 + math.sqrt(2)


@pytest.fixture
def two_jobs() -> Instance:
    """w = (1, 1), p = (2, 1), no release dates, single machine."""
    return Instance.from_arrays([1.0, 1.0], [2.0, 1.0])


@pytest.fixture
def im_family() -> Instance:
    """n = 3 instance with p = (1, 1, 9) and unit weights."""
    return Instance.from_arrays([1.0, 1.0, 1.0], [1.0, 1.0, 9.0])


@pytest.fixture
def rng() -> np.random.Generator:
    return np.random.default_rng(20240101)


def random_instance(
    rng: np.random.Generator,
    n: int,
    env: str = "single",
    m: int = 1,
    weighted: bool = True,
    releases: bool = False,
) -> Instance:
    """Small random instance for property-style tests."""
    weights = rng.uniform(0.5, 5.0, n) if weighted else np.ones(n)
    processing = rng.uniform(0.1, 10.0, n)
    release = rng.uniform(0.0, 10.0, n) if releases else np.zeros(n)
    if env == "single":
        environment = MachineEnvironment.single()
    elif env == "identical":
        environment = MachineEnvironment.identical(m)
    else:
        environment = MachineEnvironment.unrelated(rng.uniform(1.0, 4.0, (m, n)))
    return Instance.from_arrays(weights, processing, release, environment)
