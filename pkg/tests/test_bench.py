from __future__ import annotations

import csv
import json
import math

import numpy as np
import pytest

from distroute.bench import (TABLES, BenchError, ExperimentManifest, back_and_forth_share, emit_report,
                             evaluate_solution, gap_percent, run_manifest, solution_compactness,
                             svg_choropleth)
from distroute.partition import Solution, initial_solution, make_instance
from distroute.region import RegionModel, grid_region, make_unit
from distroute.scenario import ScenarioSet, sample_scenarios


def test_gap_percent():
    assert gap_percent(5.0, 5.0) == 0.0
    assert gap_percent(1.1 * 7.0, 7.0) == pytest.approx(10.0)
    with pytest.raises(BenchError):
        gap_percent(1.0, 0.0)


def test_single_customer_tours_are_all_back_and_forth(grid45):
    per_unit = tuple((np.array([[u % 5 + 0.5, u // 5 + 0.5]]),) for u in range(20))
    scen = ScenarioSet("test", per_unit, 0, 1.0)
    singles = [[u] for u in range(20)]
    assert back_and_forth_share(grid45, singles, scen) == pytest.approx(100.0)


def test_back_and_forth_grows_with_depot_distance():
    base = grid_region(4, 4, seed=0)
    scen = sample_scenarios(base, 6.0 / 8000, 6, seed=0, split="test")
    districts = [[0, 1, 4, 5], [2, 3, 6, 7], [8, 9, 12, 13], [10, 11, 14, 15]]
    shares = [back_and_forth_share(base.with_depot((2.0, 2.0 + off)), districts, scen) for off in (0.0, 10.0, 40.0)]
    assert shares[0] < shares[1] < shares[2] <= 100.0
    assert shares[0] > 0


def test_all_empty_tours_error(grid45):
    scen = ScenarioSet("test", tuple((np.empty((0, 2)),) for _ in range(20)), 0, 1.0)
    with pytest.raises(BenchError):
        back_and_forth_share(grid45, [range(20)], scen)


def test_compactness_circle_and_bounds(inst45):
    ring = [(math.cos(a), math.sin(a)) for a in np.linspace(0, 2 * math.pi, 96, endpoint=False)]
    disc = RegionModel((make_unit(0, ring, 8000.0, (0.0, 0.0)),), frozenset(), (0.0, 0.0))
    assert solution_compactness(disc, [[0]]) == pytest.approx(1.0, abs=2e-3)
    score = solution_compactness(inst45.region, initial_solution(inst45, seed=0))
    assert 0 < score <= 1


def test_evaluate_requires_test_split(inst45):
    sol = initial_solution(inst45, seed=0)
    train = sample_scenarios(inst45.region, inst45.kappa, 2, seed=0)
    with pytest.raises(BenchError):
        evaluate_solution(inst45.region, sol, train)
    ev = evaluate_solution(inst45.region, sol, sample_scenarios(inst45.region, inst45.kappa, 2, 1, "test"))
    assert ev.test_cost > 0 and 0 < ev.back_and_forth <= 100


def read_csv(path):
    with open(path) as fh:
        return list(csv.DictReader(fh))


def test_empty_report_has_headers_only(tmp_path):
    emit_report({}, tmp_path)
    for name, header in TABLES.items():
        assert (tmp_path / f"{name}.csv").read_text() == ",".join(header) + "\n"
    assert (tmp_path / "summary.md").exists()


def test_report_rows_and_svg(tmp_path, inst45):
    sol = initial_solution(inst45, seed=0)
    results = {
        "rmse": [{"instance": "i", "oracle": "gnn", "seed": 0, "rmse": 1.0},
                 {"instance": "i", "oracle": "fig", "seed": 0, "rmse": 2.0}],
        "solutions": [{"instance": "i", "oracle": k, "seed": 0, "oracle_cost": 1.0, "test_cost": c,
                       "compactness": 0.5, "back_and_forth": 40.0} for k, c in (("gnn", 10.0), ("fig", 11.0))],
        "reference": {},
    }
    emit_report(results, tmp_path, {"map": (inst45.region, sol)})
    assert len(read_csv(tmp_path / "rmse.csv")) == 2
    gaps = {r["oracle"]: float(r["gap_percent"]) for r in read_csv(tmp_path / "gaps.csv")}
    assert gaps == pytest.approx({"gnn": 0.0, "fig": 10.0})
    results["reference"] = {"i": 8.0}
    emit_report(results, tmp_path / "b")
    gaps = {r["oracle"]: float(r["gap_percent"]) for r in read_csv(tmp_path / "b" / "gaps.csv")}
    assert gaps == pytest.approx({"gnn": 25.0, "fig": 37.5})
    svg = (tmp_path / "map.svg").read_text()
    assert svg.count("<polygon") == inst45.region.n
    assert svg_choropleth(inst45.region, sol) == svg


def test_report_names_missing_fields(tmp_path):
    with pytest.raises(BenchError, match="rmse"):
        emit_report({"rmse": [{"instance": "i", "oracle": "gnn", "seed": 0}]}, tmp_path)


def test_manifest_validation(tmp_path):
    m = ExperimentManifest(oracles=["gnn", "lkh"], test_seed=0, scenario_seed=0,
                           regions=[{"path": "missing.json"}])
    problems = m.validate(tmp_path)
    assert len(problems) == 3
    back = ExperimentManifest.from_dict(json.loads(json.dumps(ExperimentManifest().to_dict())))
    assert back == ExperimentManifest()
    with pytest.raises(BenchError):
        ExperimentManifest.from_dict({"colour": 1})
    with pytest.raises(BenchError):
        run_manifest(m, tmp_path)


@pytest.mark.slow
def test_tiny_manifest_runs(tmp_path):
    m = ExperimentManifest(regions=[{"kind": "grid", "width": 3, "height": 4, "seed": 0}], depots=["NE"],
                           oracles=["bhhd", "fig"], n_train_scenarios=3, n_test_scenarios=3,
                           n_districts=30, n_test_districts=6, budget_iters=3, out_dir="o")
    res = run_manifest(m, tmp_path)
    assert len(res["rmse"]) == 2 and len(res["solutions"]) == 2
    gaps = read_csv(tmp_path / "o" / "report" / "gaps.csv")
    assert all(float(r["gap_percent"]) >= -1e-9 for r in gaps)
