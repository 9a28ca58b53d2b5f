import numpy as np
import pytest

from spadetect.posmap import custom_map
from spadetect.qstate import random_density

ACCEPTANCE_LINES = []


def record_acceptance(line: str) -> None:
    ACCEPTANCE_LINES.append(line)
    print(line)


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)


@pytest.fixture
def rng():
    return np.random.default_rng(20240601)


@pytest.fixture(scope="session")
def two_qubit_states():
    """1000 random two-qubit states, mixed ranks, fixed seeds."""
    rng = np.random.default_rng(7)
    return [random_density(4, int(rng.integers(1, 5)), seed=rng, dims=(2, 2)) for _ in range(1000)]


def brute_partial_transpose(mat, da, db):
    """Entry-by-entry transpose of the second factor."""
    out = np.zeros_like(mat)
    for i in range(da):
        for a in range(db):
            for j in range(da):
                for b in range(db):
                    out[i * db + a, j * db + b] = mat[i * db + b, j * db + a]
    return out


def brute_partial_trace_b(mat, da, db):
    out = np.zeros((da, da), dtype=complex)
    for i in range(da):
        for j in range(da):
            out[i, j] = sum(mat[i * db + a, j * db + a] for a in range(db))
    return out


def choi_from_action(action, d):
    """Choi matrix assembled block by block from the action on matrix units."""
    j = np.zeros((d * d, d * d), dtype=complex)
    for i in range(d):
        for k in range(d):
            e = np.zeros((d, d))
            e[i, k] = 1
            j[i * d:(i + 1) * d, k * d:(k + 1) * d] = action(e)
    return j


def squeezed_transpose_map():
    """X -> A X^T A^dag with A = diag(1, 1/2): positive, trace decreasing."""
    a = np.diag([1.0, 0.5])
    return custom_map(choi_from_action(lambda x: a @ x.T @ a.conj().T, 2), 2,
                      declared_positive=True, name="squeezed")
