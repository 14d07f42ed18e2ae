"""
rnest - Test Fixtures
---------------------
Shared fixtures and the ``slow`` marker. Slow statistical checks run only with
``pytest --runslow``.
"""

import os

import numpy as np
import pytest

from rnest.core import default_schedule
from rnest.problems import counting_problem, gaussian_sine_problem
from rnest.read import ReadConfig


def pytest_addoption(parser):
    parser.addoption("--runslow", action="store_true", default=False, help="run slow statistical tests")


def pytest_configure(config):
    config.addinivalue_line("markers", "slow: long-running statistical acceptance test")


def pytest_collection_modifyitems(config, items):
    if config.getoption("--runslow"):
        return
    skip_slow = pytest.mark.skip(reason="needs --runslow")
    for item in items:
        if "slow" in item.keywords:
            item.add_marker(skip_slow)


@pytest.fixture
def rng():
    """Fresh generator with a fixed seed."""
    return np.random.default_rng(12345)


@pytest.fixture
def sine_problem():
    return gaussian_sine_problem()


@pytest.fixture
def sine_config(sine_problem):
    """Gaussian-sine problem under the (0.74, 0.6) schedule."""
    return ReadConfig(problem=sine_problem, schedule=default_schedule(2))


@pytest.fixture
def counting():
    """Depth-2 counting problem with its call counters reset."""
    problem = counting_problem(2)
    problem.simulator.reset()
    problem.terminal.reset()
    return problem


@pytest.fixture(autouse=True)
def isolated_settings(monkeypatch, tmp_path):
    """Keep READ_* variables and stray .env files out of the tests."""
    for name in list(os.environ):
        if name.upper().startswith("READ_"):
            monkeypatch.delenv(name, raising=False)
    monkeypatch.chdir(tmp_path)

