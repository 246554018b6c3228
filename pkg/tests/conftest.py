import numpy as np
import pytest

from ecdiff import Schedule, default_task


@pytest.fixture(scope="session")
def sched() -> Schedule:
    return Schedule()


@pytest.fixture(scope="session")
def task():
    return default_task()


@pytest.fixture
def rng() -> np.random.Generator:
    return np.random.default_rng(20260815)
