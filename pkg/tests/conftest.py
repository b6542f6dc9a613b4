from __future__ import annotations

import numpy as np
import pytest
from hypothesis import settings

from distroute.partition import make_instance
from distroute.region import RegionModel, grid_region, make_unit

settings.register_profile("ci", max_examples=40, deadline=None)
settings.load_profile("ci")


def square(x0, y0, s=1.0):
    return [(x0, y0), (x0 + s, y0), (x0 + s, y0 + s), (x0, y0 + s)]


def path_region(n: int, depot=(0.0, -1.0)) -> RegionModel:
    """n unit squares in a row, each adjacent only to its neighbours."""
    units = tuple(make_unit(i, square(i, 0), 8000.0, depot) for i in range(n))
    edges = frozenset((i, i + 1) for i in range(n - 1))
    return RegionModel(units, edges, depot, "path")


def region_from_edges(n: int, edges, depot=(0.0, -1.0)) -> RegionModel:
    """Abstract graph: unit i is the square at (2i, 0); adjacency given explicitly."""
    units = tuple(make_unit(i, square(2 * i, 0), 8000.0, depot) for i in range(n))
    return RegionModel(units, frozenset((min(a, b), max(a, b)) for a, b in edges), depot, "graph")


@pytest.fixture
def grid45():
    return grid_region(4, 5, seed=0)


@pytest.fixture
def inst45(grid45):
    return make_instance(grid45, 3, "NE")


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


def central_gradient(f, x: np.ndarray, h: float = 1e-6) -> np.ndarray:
    """Central finite differences of scalar ``f`` with respect to array ``x`` (perturbed in place)."""
    g = np.zeros(x.shape)
    for i in np.ndindex(x.shape):
        old = x[i]
        x[i] = old + h
        up = f()
        x[i] = old - h
        down = f()
        x[i] = old
        g[i] = (up - down) / (2 * h)
    return g


def relative_error(a: np.ndarray, b: np.ndarray) -> float:
    """Norm-wise relative difference, floored so two near-zero vectors compare as equal."""
    a, b = np.ravel(a), np.ravel(b)
    return float(np.linalg.norm(a - b) / max(np.linalg.norm(a), np.linalg.norm(b), 1e-8))


# -- acceptance summary ----------------------------------------------------------

ACCEPTANCE: dict[int, str] = {}


def verdict(number: int, title: str, ok: bool, detail: str) -> None:
    """Record one acceptance line for the terminal summary, then assert it."""
    line = f"criterion {number:2d}: {'PASS' if ok else 'FAIL'}  {title}  ({detail})"
    ACCEPTANCE[number] = line
    print(line)
    assert ok, line


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE:
        terminalreporter.section("acceptance criteria")
        for number in sorted(ACCEPTANCE):
            terminalreporter.write_line(ACCEPTANCE[number])
