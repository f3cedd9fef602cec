import numpy as np
import pytest

from mopasim.config import ExperimentConfig
from mopasim.pipeline import Pipeline

_ACCEPTANCE = {}


def record_criterion(number: int, ok: bool, detail: str) -> None:
    """Store an acceptance result; printed in the terminal summary."""
    _ACCEPTANCE[number] = (bool(ok), detail)


def pytest_terminal_summary(terminalreporter):
    if not _ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for n in sorted(_ACCEPTANCE):
        ok, detail = _ACCEPTANCE[n]
        terminalreporter.write_line(f"criterion {n:2d}: {'PASS' if ok else 'FAIL'}  {detail}")


@pytest.fixture(scope="session")
def pipeline():
    """Default experiment; kernels are computed once per test session."""
    return Pipeline(ExperimentConfig())


@pytest.fixture(scope="session")
def grid(pipeline):
    return pipeline.grid


@pytest.fixture(scope="session")
def kernels(pipeline):
    return pipeline.kernels


@pytest.fixture(scope="session")
def decomps(pipeline):
    return pipeline.decompositions


@pytest.fixture
def rng():
    return np.random.default_rng(1234)
