"""Shared fixtures: expensive solver runs are computed once per session."""

from __future__ import annotations

import time

import pytest

from augvi.alm import SolverConfig, solve
from augvi.zoo import nash_control, param_estimation, poisson_control

ACCEPTANCE_LINES = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)


class TimedRun:
    def __init__(self, inst, cfg):
        self.inst = inst
        t0 = time.perf_counter()
        self.history = solve(inst.problem, cfg)
        self.seconds = time.perf_counter() - t0


def _run(inst, **overrides):
    return TimedRun(inst, SolverConfig(**{**inst.config, **overrides}))


@pytest.fixture(scope="session")
def poisson64():
    return _run(poisson_control(64))


@pytest.fixture(scope="session")
def poisson64_start2():
    return _run(poisson_control(64), penalty_test_start=2)


@pytest.fixture(scope="session")
def nash64():
    return _run(nash_control(64))


@pytest.fixture(scope="session")
def param256_beta1():
    return _run(param_estimation(256, beta=1.0))


@pytest.fixture(scope="session")
def param256_beta001():
    return _run(param_estimation(256, beta=0.01))
