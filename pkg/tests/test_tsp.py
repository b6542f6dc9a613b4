from __future__ import annotations

import itertools
import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from distroute.tsp import TSPError, tour_length, tsp_cost, tsp_exact


def brute_force(depot, pts):
    """Independent oracle: every permutation via itertools."""
    best = math.inf
    for perm in itertools.permutations(range(len(pts))):
        best = min(best, tour_length(depot, pts, perm))
    return best if len(pts) else 0.0


def test_empty_and_single_customer():
    assert tsp_cost((0, 0), []).length == 0.0
    assert tsp_exact((0, 0), []).length == 0.0
    assert tsp_cost((0, 0), [(3, 4)]).length == pytest.approx(10.0)
    assert tsp_exact((0, 0), [(3, 4)]).length == pytest.approx(10.0)


def test_three_customers_minimum_over_orders():
    pts = np.array([(1.0, 0.0), (0.0, 2.0), (-1.5, -0.5)])
    lengths = {tour_length((0, 0), pts, p) for p in itertools.permutations(range(3))}
    assert len(lengths) == 3  # 3!/2 distinct directed cycles
    assert tsp_exact((0, 0), pts).length == pytest.approx(min(lengths))


def test_collinear_ray():
    pts = np.array([(1.0, 1.0), (3.0, 3.0), (2.0, 2.0), (0.5, 0.5)])
    assert tsp_exact((0, 0), pts).length == pytest.approx(2 * math.hypot(3, 3))
    assert tsp_cost((0, 0), pts).length == pytest.approx(2 * math.hypot(3, 3))


@given(st.integers(0, 100_000), st.integers(1, 7))
def test_exact_matches_permutation_oracle(seed, n):
    rng = np.random.default_rng(seed)
    pts, depot = rng.uniform(0, 10, (n, 2)), rng.uniform(0, 10, 2)
    exact = tsp_exact(depot, pts)
    assert exact.length == pytest.approx(brute_force(depot, pts), rel=1e-12)
    assert tour_length(depot, pts, exact.order) == pytest.approx(exact.length, rel=1e-12)


@given(st.integers(0, 100_000), st.integers(1, 10))
def test_exact_never_above_heuristic(seed, n):
    rng = np.random.default_rng(seed)
    pts, depot = rng.uniform(0, 10, (n, 2)), rng.uniform(0, 10, 2)
    assert tsp_exact(depot, pts).length <= tsp_cost(depot, pts).length + 1e-9


def test_heuristic_quality_band_small_instances():
    rng = np.random.default_rng(2024)
    within = 0
    for _ in range(300):
        n = int(rng.integers(1, 10))
        pts, depot = rng.uniform(0, 10, (n, 2)), rng.uniform(0, 10, 2)
        h, e = tsp_cost(depot, pts).length, tsp_exact(depot, pts).length
        assert h >= e - 1e-9
        within += h <= 1.02 * e
    assert within >= 0.95 * 300


@pytest.mark.parametrize("n", [5, 30, 90])
def test_tour_is_a_permutation_and_length_consistent(n):
    rng = np.random.default_rng(n)
    pts, depot = rng.uniform(0, 5, (n, 2)), rng.uniform(0, 5, 2)
    tour = tsp_cost(depot, pts)
    assert sorted(tour.order) == list(range(n))
    assert tour_length(depot, pts, tour.order) == pytest.approx(tour.length, abs=1e-9)


@pytest.mark.parametrize("n", [20, 60, 120])
def test_no_improving_two_opt_move(n):
    rng = np.random.default_rng(100 + n)
    pts, depot = rng.uniform(0, 5, (n, 2)), rng.uniform(0, 5, 2)
    tour = tsp_cost(depot, pts)
    seq = np.vstack([depot[None], pts[list(tour.order)]])
    m = len(seq)
    d = lambda a, b: float(np.linalg.norm(seq[a % m] - seq[b % m]))
    for i in range(m - 1):
        for j in range(i + 2, m):
            if i == 0 and j == m - 1:
                continue
            delta = d(i, j) + d(i + 1, j + 1) - d(i, i + 1) - d(j, j + 1)
            assert delta >= -1e-9


def test_rigid_motion_invariance():
    rng = np.random.default_rng(7)
    c, s = math.cos(0.7), math.sin(0.7)
    rot = np.array([[c, s], [-s, c]])
    for n in (6, 25):
        pts, depot = rng.uniform(0, 5, (n, 2)), rng.uniform(0, 5, 2)
        base = tsp_cost(depot, pts).length
        moved = tsp_cost(depot @ rot + 3.0, pts @ rot + 3.0).length
        assert moved == pytest.approx(base, abs=1e-6)


def test_exact_monotone_under_inclusion():
    rng = np.random.default_rng(11)
    for _ in range(100):
        q = rng.uniform(0, 5, (int(rng.integers(2, 9)), 2))
        keep = rng.random(len(q)) < 0.6
        depot = rng.uniform(0, 5, 2)
        assert tsp_exact(depot, q[keep]).length <= tsp_exact(depot, q).length + 1e-12


def test_exact_refuses_large_inputs():
    with pytest.raises(TSPError):
        tsp_exact((0, 0), np.zeros((11, 2)))


def test_duplicates_and_seed_determinism():
    pts = np.array([(1.0, 1.0)] * 4 + [(2.0, 0.0)] * 3)
    assert tsp_cost((0, 0), pts).length == pytest.approx(tsp_exact((0, 0), pts).length)
    rng = np.random.default_rng(3)
    big = rng.uniform(0, 5, (70, 2))
    assert tsp_cost((0, 0), big, seed=4) == tsp_cost((0, 0), big, seed=4)
