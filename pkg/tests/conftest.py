import numpy as np
import pytest

from gwrboost.data import Dataset


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


def grid_dataset(side, rng, p=2, noise=0.1, beta=None):
    u, v = np.meshgrid(np.arange(side, dtype=float), np.arange(side, dtype=float))
    coords = np.column_stack([u.ravel(), v.ravel()])
    n = len(coords)
    Z = rng.standard_normal((n, p))
    if beta is None:
        b = np.column_stack([1.0 + 0.2 * coords[:, 0], *(np.sin(coords[:, 1] / 3.0 + j) for j in range(p))])
    else:
        b = np.tile(np.asarray(beta, dtype=float), (n, 1))
    y = b[:, 0] + np.einsum("ij,ij->i", b[:, 1:], Z) + noise * rng.standard_normal(n)
    return Dataset(coords, Z, y)


@pytest.fixture
def small_grid(rng):
    return grid_dataset(8, rng)


ACCEPTANCE_LINES = {}


def record_criterion(key, passed, detail):
    ACCEPTANCE_LINES[key] = f"{'PASS' if passed else 'FAIL'}  {key}: {detail}"
    print(ACCEPTANCE_LINES[key])


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for key in sorted(ACCEPTANCE_LINES):
            terminalreporter.write_line(ACCEPTANCE_LINES[key])
