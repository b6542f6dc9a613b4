from __future__ import annotations

import numpy as np
import pytest
from hypothesis import given, strategies as st

from distroute import geometry as geo
from distroute.exact import solve_exact
from distroute.ils import (P_RM, CostCache, Move, _State, apply_move, border, feasible_moves, inverse,
                           local_search, perturb, solve_ils)
from distroute.oracles import SAAOracle
from distroute.partition import InstanceConfig, Solution, initial_solution, make_instance, validate_solution
from distroute.region import grid_region, is_connected
from distroute.scenario import sample_scenarios

from conftest import path_region, region_from_edges

A, B, C, D, E, F = range(6)


def config_for(region, k, n_lo, n_hi):
    return InstanceConfig(region, max(2, n_lo), n_lo, n_hi, k, 0.004, "C", region.depot)


@pytest.fixture
def six_units():
    """Three districts I={A,B,C}, II={D,E}, III={F}; C touches E but not D."""
    edges = [(A, B), (B, C), (A, C), (A, D), (B, D), (C, E), (D, E), (E, F)]
    cfg = config_for(region_from_edges(6, edges), 3, 1, 4)
    return cfg, Solution.from_districts([[A, B, C], [D, E], [F]])


class SpreadOracle:
    """Sum of squared deviations of unit centroids from the district mean: favours round districts."""

    kind = "spread"

    def __init__(self, region):
        self.xy = np.array([geo.centroid(r) for r in region.rings])
        self.calls = 0

    def predict_many(self, districts):
        self.calls += len(districts)
        out = []
        for d in districts:
            p = self.xy[sorted(d)]
            out.append(float(((p - p.mean(axis=0)) ** 2).sum()))
        return np.array(out)


def brute_moves(cfg, sol, i, j):
    """Feasible relocations and swaps between districts i and j, checked from first principles."""
    nb = cfg.region.neighbors
    dist = sol.districts()
    di, dj = set(dist[i]), set(dist[j])
    bi = {u for u in di if set(nb[u]) & dj}
    bj = {v for v in dj if set(nb[v]) & di}

    def ok(x, y):
        return (cfg.n_lo <= len(x) <= cfg.n_hi and cfg.n_lo <= len(y) <= cfg.n_hi
                and is_connected(x, nb) and is_connected(y, nb))

    out = set()
    for u in bi:
        if ok(di - {u}, dj | {u}):
            out.add(("relocate", u, i, j, None))
    for v in bj:
        if ok(di | {v}, dj - {v}):
            out.add(("relocate", v, j, i, None))
    for u in bi:
        for v in bj:
            if ok(di - {u} | {v}, dj - {v} | {u}):
                out.add(("swap", u, i, j, v))
    return out


def as_keys(moves):
    return {(m.kind, m.u, m.source, m.target, m.v) for m in moves}


# -- neighbourhood ------------------------------------------------------------------

def test_six_unit_example(six_units):
    cfg, sol = six_units
    assert border(cfg, sol, 0, 1) == {A, B, C}
    assert border(cfg, sol, 1, 0) == {D, E}
    moves = feasible_moves(cfg, sol, 0, 1)
    relocations = {(m.u, m.target) for m in moves if m.kind == "relocate"}
    assert relocations == {(A, 1), (B, 1), (C, 1), (D, 0), (E, 0)}
    assert ("swap", C, 0, 1, D) in as_keys(moves)
    after = apply_move(sol, Move("swap", C, 0, 1, D))
    assert after.districts()[:2] == [frozenset({A, B, D}), frozenset({C, E})]


def test_border_empty_and_symmetric(six_units, grid45, inst45):
    cfg, sol = six_units
    assert border(cfg, sol, 0, 2) == set()
    sol = initial_solution(inst45, seed=2)
    nb = inst45.region.neighbors
    for i in range(sol.k):
        for j in range(sol.k):
            if i != j:
                bji = border(inst45, sol, j, i)
                assert all(set(nb[u]) & bji for u in border(inst45, sol, i, j))
    with pytest.raises(ValueError):
        border(inst45, sol, 1, 1)


def test_lower_bound_and_articulation_excluded():
    region = path_region(6)
    cfg = config_for(region, 2, 3, 4)
    sol = Solution.from_districts([[0, 1, 2], [3, 4, 5]])
    keys = as_keys(feasible_moves(cfg, sol, 0, 1))
    assert keys == set()  # both at n_lo, and a swap of 2 and 3 breaks both paths
    sol = Solution.from_districts([[0, 1, 2, 3], [4, 5]])
    cfg = config_for(region, 2, 2, 4)
    assert as_keys(feasible_moves(cfg, sol, 0, 1)) == {("relocate", 3, 0, 1, None)}


@given(st.integers(0, 10_000))
def test_feasible_moves_match_brute_force(seed):
    rng = np.random.default_rng(seed)
    inst = make_instance(grid_region(int(rng.integers(3, 6)), int(rng.integers(3, 6)), seed=seed),
                         int(rng.integers(2, 5)))
    sol = initial_solution(inst, seed=seed)
    sol = perturb(inst, sol, 0.3, rng)
    for i in range(sol.k):
        for j in range(i + 1, sol.k):
            assert as_keys(feasible_moves(inst, sol, i, j)) == brute_moves(inst, sol, i, j)


def test_apply_revert_exact(inst45):
    sol = initial_solution(inst45, seed=1)
    cache = CostCache(SpreadOracle(inst45.region))
    st_ = _State(sol)
    before_assign, before_members = list(st_.assign), [set(m) for m in st_.members]
    before_cost = cache.total(sol)
    for i in range(sol.k):
        for j in range(sol.k):
            if i == j:
                continue
            for m in feasible_moves(inst45, sol, i, j):
                st_.apply(m)
                st_.revert(m)
                assert st_.assign == before_assign and st_.members == before_members
                assert inverse(inverse(m)) == m
    assert cache.total(st_.solution()) == before_cost


def test_delta_equals_fresh_reevaluation(inst45):
    sol = initial_solution(inst45, seed=4)
    oracle = SpreadOracle(inst45.region)
    cache = CostCache(oracle)
    st_ = _State(sol)
    for i in range(sol.k):
        for j in range(i + 1, sol.k):
            for m in feasible_moves(inst45, sol, i, j):
                before = cache.get_many([frozenset(st_.members[i]), frozenset(st_.members[j])])
                new = cache.get_many(list(st_.after(m)))
                delta = new[0] + new[1] - before[0] - before[1]
                fresh = oracle.predict_many(list(st_.after(m))).sum() - oracle.predict_many(
                    [sol.districts()[i], sol.districts()[j]]).sum()
                assert delta == pytest.approx(fresh, abs=1e-12)
                moved = apply_move(sol, m)
                assert cache.total(moved) - cache.total(sol) == pytest.approx(delta, abs=1e-9)


# -- local search and perturbation ----------------------------------------------------

def test_planted_swap_found_in_one_sweep():
    region = grid_region(4, 2)
    cfg = config_for(region, 2, 4, 4)
    start = Solution.from_districts([[0, 1, 2, 4], [3, 5, 6, 7]])
    out = local_search(cfg, start, SpreadOracle(region), np.random.default_rng(0))
    assert out.canonical() == {frozenset({0, 1, 4, 5}), frozenset({2, 3, 6, 7})}


def test_local_optimum_is_a_fixed_point(inst45):
    oracle = SpreadOracle(inst45.region)
    once = local_search(inst45, initial_solution(inst45, seed=0), oracle, np.random.default_rng(1))
    twice = local_search(inst45, once, oracle, np.random.default_rng(2))
    assert twice.assignment == once.assignment
    cache = CostCache(oracle)
    for i in range(once.k):
        for j in range(once.k):
            if i != j:
                for m in feasible_moves(inst45, once, i, j):
                    assert cache.total(apply_move(once, m)) >= cache.total(once) - 1e-9


def test_local_search_with_saa_never_worsens(grid45):
    inst = make_instance(grid45, 4, "SW")
    oracle = SAAOracle(inst.region, sample_scenarios(inst.region, inst.kappa, 3, seed=0))
    start = initial_solution(inst, seed=0)
    out = local_search(inst, start, oracle, np.random.default_rng(0))
    assert validate_solution(out, inst) == []
    assert CostCache(oracle).total(out) <= CostCache(oracle).total(start)


def test_perturb_zero_probability_is_identity(inst45):
    sol = initial_solution(inst45, seed=0)
    assert perturb(inst45, sol, 0.0, np.random.default_rng(0)).assignment == sol.assignment
    with pytest.raises(ValueError):
        perturb(inst45, sol, 1.0)


def test_perturb_rate_monte_carlo():
    region = grid_region(3, 2)
    cfg = config_for(region, 2, 2, 4)
    sol = Solution.from_districts([[0, 1, 3], [2, 4, 5]])
    stats = {}
    rng = np.random.default_rng(0)
    for _ in range(10_000):
        perturb(cfg, sol, P_RM, rng, stats)
    rate = stats["applied"] / stats["considered"]
    assert 0.010 <= rate <= 0.020


@given(st.integers(0, 10_000), st.sampled_from([0.015, 0.2, 0.6]))
def test_perturb_output_feasible(seed, p):
    inst = make_instance(grid_region(5, 4, seed=seed), 3)
    sol = initial_solution(inst, seed=seed)
    assert validate_solution(perturb(inst, sol, p, np.random.default_rng(seed)), inst) == []


# -- outer loop ---------------------------------------------------------------------

def test_zero_iterations_is_initial_local_optimum(inst45):
    oracle = SpreadOracle(inst45.region)
    best, log = solve_ils(inst45, oracle, seed=3, budget_iters=0)
    ref = local_search(inst45, initial_solution(inst45, seed=3), oracle, np.random.default_rng(3))
    assert best.assignment == ref.assignment
    assert log.iterations == 0 and len(log.rows) == 1


def test_ils_log_and_determinism(inst45):
    oracle = SpreadOracle(inst45.region)
    a, log = solve_ils(inst45, oracle, seed=7, budget_iters=25)
    b, _ = solve_ils(inst45, SpreadOracle(inst45.region), seed=7, budget_iters=25)
    assert a.assignment == b.assignment
    costs = [c for _, c, _ in log.rows]
    assert costs == sorted(costs, reverse=True) and len(costs) == 26
    assert costs[-1] == pytest.approx(CostCache(oracle).total(a))
    assert costs[0] <= log.initial_cost
    assert log.to_csv().splitlines()[0] == "iter,oracle_cost,seconds"
    assert a.meta["iterations"] == 25 and a.meta["p_rm"] == P_RM


def test_time_budget_respected(inst45):
    import time
    t0 = time.perf_counter()
    best, log = solve_ils(inst45, SpreadOracle(inst45.region), seed=0, budget_seconds=0.3)
    assert time.perf_counter() - t0 < 2.0
    assert validate_solution(best, inst45) == []


def test_ils_reaches_global_optimum_on_enumerable_instance():
    region = grid_region(4, 3, seed=2)
    inst = make_instance(region, 3, "NE")
    oracle = SAAOracle(inst.region, sample_scenarios(inst.region, inst.kappa, 4, seed=1))
    opt = solve_exact(inst, oracle)
    hits = 0
    for seed in range(20):
        best, _ = solve_ils(inst, oracle, seed=seed, budget_iters=200)
        hits += abs(best.meta["oracle_cost"] - opt.value) <= 1e-9 * opt.value
    assert hits >= 19
