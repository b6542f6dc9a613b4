from __future__ import annotations

import itertools

import numpy as np
import pytest

from distroute.region import grid_region, is_connected
from distroute.saa import (DatasetError, LabeledDataset, build_labeled_dataset, label_districts,
                           saa_district_cost, saa_solution_cost, sample_random_districts,
                           scenario_costs, split_roles)
from distroute.scenario import ScenarioSet, sample_scenarios
from distroute.tsp import tsp_exact

from conftest import path_region


def fixed_scenarios(points_per_unit, split="test"):
    """ScenarioSet from explicit per-unit, per-scenario point arrays."""
    per_unit = tuple(tuple(np.asarray(p, dtype=float).reshape(-1, 2) for p in unit) for unit in points_per_unit)
    return ScenarioSet(split, per_unit, 0, 1.0)


def test_empty_scenarios_cost_zero():
    region = path_region(3)
    scen = fixed_scenarios([[[], []]] * 3)
    assert saa_district_cost(region, {0, 1, 2}, scen) == 0.0


def test_single_customer_out_and_back():
    region = path_region(2, depot=(0.0, -1.0))
    scen = fixed_scenarios([[[(0.0, 2.0)]], [[]]])
    assert saa_district_cost(region, {0}, scen) == pytest.approx(6.0)
    assert saa_district_cost(region, {0, 1}, scen) == pytest.approx(6.0)


def test_cost_is_mean_of_scenarios():
    region = path_region(1, depot=(0.0, 0.0))
    scen = fixed_scenarios([[[(1.0, 0.0)], [(0.0, 3.0)], []]])
    assert scenario_costs(region, {0}, scen).tolist() == pytest.approx([2.0, 6.0, 0.0])
    assert saa_district_cost(region, {0}, scen) == pytest.approx(8.0 / 3)


def test_rejects_empty_or_mismatched_scenarios():
    region = path_region(2)
    with pytest.raises(DatasetError):
        saa_district_cost(region, {0}, ScenarioSet("train", ((), ()), 0, 1.0))
    with pytest.raises(DatasetError):
        saa_district_cost(region, {0}, fixed_scenarios([[[]]]))


def test_heuristic_mean_close_to_exact_mean(grid45):
    scen = sample_scenarios(grid45, 1.5 / 8000, 20, seed=4)
    district = {0, 1, 5}
    assert scen.request_counts()[sorted(district)].sum(axis=0).max() <= 9
    heur = saa_district_cost(grid45, district, scen)
    exact = saa_district_cost(grid45, district, scen, exact=True)
    assert exact <= heur + 1e-9
    assert heur <= 1.02 * exact


def test_lower_bound_two_min_depot_distance(grid45):
    scen = sample_scenarios(grid45, 4.0 / 8000, 8, seed=1)
    for d in sample_random_districts(grid45, 2, 4, 20, seed=2):
        if scen.request_counts()[sorted(d)].sum(axis=0).any():
            members = sorted(d)
            # every nonempty scenario leaves the depot and comes back
            costs = scenario_costs(grid45, d, scen)
            nonempty = scen.request_counts()[members].sum(axis=0) > 0
            assert np.all(costs[nonempty] >= 2 * grid45.depot_distances[members].min() - 1e-9)


def test_solution_cost_properties(grid45):
    scen = sample_scenarios(grid45, 3.0 / 8000, 6, seed=0)
    whole = saa_solution_cost(grid45, [range(20)], scen)
    assert whole == pytest.approx(saa_district_cost(grid45, range(20), scen))
    a = [set(range(0, 10)), set(range(10, 20))]
    b = [set(range(0, 10)) - {9} | {10}, set(range(10, 20)) - {10} | {9}]
    ca, cb = saa_solution_cost(grid45, a, scen), saa_solution_cost(grid45, b, scen)
    delta = sum(saa_district_cost(grid45, d, scen) for d in b) - sum(saa_district_cost(grid45, d, scen) for d in a)
    assert cb - ca == pytest.approx(delta)
    assert ca >= max(saa_district_cost(grid45, d, scen) for d in a)
    with pytest.raises(DatasetError):
        saa_solution_cost(grid45, [range(19)], scen)


def test_nested_districts_monotone_with_exact_tsp(grid45):
    scen = sample_scenarios(grid45, 1.0 / 8000, 10, seed=9)
    rng = np.random.default_rng(0)
    for d in sample_random_districts(grid45, 3, 4, 10, seed=3):
        sub = set(d)
        sub.discard(sorted(d)[int(rng.integers(len(d)))])
        big = saa_district_cost(grid45, d, scen, exact=True)
        assert saa_district_cost(grid45, sub, scen, exact=True) <= big + 1e-12


def test_path_pairs_enumerated():
    region = path_region(5)
    got = sample_random_districts(region, 2, 2, 4, seed=0)
    assert set(got) == {frozenset({i, i + 1}) for i in range(4)}
    with pytest.raises(DatasetError, match="4 of 5"):
        sample_random_districts(region, 2, 2, 5, seed=0, max_attempts=500)


def test_singletons_and_connectivity(grid45):
    singles = sample_random_districts(grid45, 1, 1, 20, seed=0)
    assert all(len(d) == 1 for d in singles)
    for d in sample_random_districts(grid45, 2, 6, 200, seed=5):
        assert 2 <= len(d) <= 6 and is_connected(d, grid45.neighbors)


def test_sampled_districts_match_enumeration_support():
    # every connected 3-set of a 3x3 grid is reachable by the sampler
    region = grid_region(3, 3, seed=0)
    connected = {frozenset(c) for c in itertools.combinations(range(9), 3) if is_connected(c, region.neighbors)}
    got = sample_random_districts(region, 3, 3, len(connected), seed=0, max_attempts=100_000)
    assert set(got) == connected


def test_split_ratio():
    roles = split_roles(9, (8, 1), seed=0)
    assert roles.count("train") == 8 and roles.count("val") == 1


def test_dataset_roundtrip_and_determinism(tmp_path, grid45):
    scen = sample_scenarios(grid45, 3.0 / 8000, 4, seed=0)
    a = build_labeled_dataset(grid45, scen, 2, 4, 18, seed=7)
    b = build_labeled_dataset(grid45, scen, 2, 4, 18, seed=7)
    a.save(tmp_path / "a.jsonl")
    b.save(tmp_path / "b.jsonl")
    assert (tmp_path / "a.jsonl").read_bytes() == (tmp_path / "b.jsonl").read_bytes()
    back = LabeledDataset.load(tmp_path / "a.jsonl")
    assert back.records == a.records and back.header == a.header
    assert all(np.isfinite(r.cost) and r.cost >= 0 for r in a.records)
    assert len(set(a.districts)) == 18
    test = build_labeled_dataset(grid45, scen, 2, 4, 5, seed=8, role="test", exclude=a.districts)
    assert {r.role for r in test.records} == {"test"}
    assert not set(test.districts) & set(a.districts)


def test_dataset_load_errors(tmp_path):
    p = tmp_path / "d.jsonl"
    p.write_text('{"kind": "dataset"}\n{"members": [1]}\n')
    with pytest.raises(DatasetError, match="line 2"):
        LabeledDataset.load(p)
    p.write_text('{"kind": "other"}\n')
    with pytest.raises(DatasetError, match="line 1"):
        LabeledDataset.load(p)


def test_parallel_labels_match_serial(grid45):
    scen = sample_scenarios(grid45, 3.0 / 8000, 4, seed=0)
    ds = sample_random_districts(grid45, 2, 4, 12, seed=1)
    assert label_districts(grid45, scen, ds, workers=2) == label_districts(grid45, scen, ds)
