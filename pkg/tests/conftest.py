import numpy as np
import pytest

from slowkill import LossSpec, Problem


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)


def orthogonal_fixture(p=20, support=(2, 9, 15), values=(3.0, -2.5, 4.0)):
    """Identity design with a noiseless s-sparse response."""
    beta = np.zeros(p)
    beta[list(support)] = values
    X = np.eye(p)
    return Problem(X, X @ beta, LossSpec.QUADRATIC), beta


@pytest.fixture
def orthogonal():
    return orthogonal_fixture()


_ACCEPTANCE_LINES = []


@pytest.fixture
def criterion():
    """Record one PASS/FAIL line for an acceptance criterion, then assert it."""

    def record(label, passed, detail):
        line = f"{'PASS' if passed else 'FAIL'}  {label}: {detail}"
        _ACCEPTANCE_LINES.append(line)
        print(line)
        assert passed, line

    return record


def pytest_terminal_summary(terminalreporter):
    if _ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in _ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
