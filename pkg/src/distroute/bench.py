"""Evaluation metrics, report emission and manifest-driven experiment runs."""
from __future__ import annotations

import csv
import io
import json
import math
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Sequence

import numpy as np

from .geometry import reock_compactness
from .partition import Solution
from .region import RegionModel
from .saa import saa_solution_cost
from .scenario import ScenarioSet, district_scenario
from .tsp import tsp_cost


class BenchError(ValueError):
    pass


def gap_percent(z: float, z_ref: float) -> float:
    if not z_ref > 0:
        raise BenchError(f"reference value must be positive, got {z_ref}")
    return 100.0 * (z - z_ref) / z_ref


def _districts(solution) -> list[frozenset]:
    if isinstance(solution, Solution):
        return solution.districts()
    return [frozenset(d) for d in solution]


def back_and_forth_share(region: RegionModel, solution, scenarios: ScenarioSet) -> float:
    """Mean over nonempty tours of (first leg + last leg) / tour length, in percent.

    Unweighted: every (district, scenario) tour counts once.
    """
    depot = np.asarray(region.depot, dtype=float)
    shares = []
    for d in _districts(solution):
        for t in range(scenarios.count):
            pts = district_scenario(scenarios, d, t)
            if len(pts) == 0:
                continue
            tour = tsp_cost(depot, pts)
            if tour.length <= 0.0:
                continue
            first = np.linalg.norm(pts[tour.order[0]] - depot)
            last = np.linalg.norm(pts[tour.order[-1]] - depot)
            shares.append(min(1.0, (first + last) / tour.length))
    if not shares:
        raise BenchError("every tour is empty; back-and-forth share undefined")
    return 100.0 * float(np.mean(shares))


def solution_compactness(region: RegionModel, solution) -> float:
    """Mean Reock score of the districts (each district taken as the union of its units)."""
    scores = [reock_compactness([region.rings[u] for u in sorted(d)], [region.areas[u] for u in sorted(d)])
              for d in _districts(solution) if d]
    return float(np.mean(scores))


@dataclass(frozen=True)
class SolutionEval:
    test_cost: float
    compactness: float
    back_and_forth: float


def evaluate_solution(region: RegionModel, solution, scenarios: ScenarioSet) -> SolutionEval:
    if scenarios.split != "test":
        raise BenchError("solutions are evaluated on the test split only")
    ds = _districts(solution)
    return SolutionEval(saa_solution_cost(region, ds, scenarios), solution_compactness(region, ds),
                        back_and_forth_share(region, ds, scenarios))


# -- reports ---------------------------------------------------------------------

TABLES = {
    "rmse": ("instance", "oracle", "seed", "rmse"),
    "gaps": ("instance", "oracle", "seed", "oracle_cost", "test_cost", "reference", "gap_percent"),
    "compactness": ("instance", "oracle", "seed", "compactness"),
    "back_and_forth": ("instance", "oracle", "seed", "share_percent"),
}

PALETTE = ("#8dd3c7", "#ffffb3", "#bebada", "#fb8072", "#80b1d3", "#fdb462",
           "#b3de69", "#fccde5", "#d9d9d9", "#bc80bd", "#ccebc5", "#ffed6f")


def _fmt(v):
    if isinstance(v, float):
        return f"{v:.6f}"
    return str(v)


def _csv(header: Sequence[str], rows: Sequence[dict]) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    for r in rows:
        missing = [h for h in header if h not in r]
        if missing:
            raise BenchError(f"result row lacks {missing}: {r}")
        w.writerow([_fmt(r[h]) for h in header])
    return buf.getvalue()


def table_rows(results: dict) -> dict[str, list[dict]]:
    """Split raw results into per-table rows, sorted for stable output."""
    key = lambda r: (str(r["instance"]), str(r["oracle"]), int(r["seed"]))
    rmse = sorted(results.get("rmse", []), key=key)
    sols = sorted(results.get("solutions", []), key=key)
    refs = results.get("reference", {})
    gaps, comp, bnf = [], [], []
    for r in sols:
        ref = refs.get(r["instance"])
        if ref is None:  # no full-knowledge value: compare against the best method on the instance
            ref = min(s["test_cost"] for s in sols if s["instance"] == r["instance"])
        gaps.append({**r, "reference": ref, "gap_percent": gap_percent(r["test_cost"], ref)})
        comp.append(r)
        bnf.append({**r, "share_percent": r["back_and_forth"]})
    return {"rmse": rmse, "gaps": gaps, "compactness": comp, "back_and_forth": bnf}


def _means(rows: list[dict], value: str) -> list[tuple[str, float, float, int]]:
    by: dict[str, list[float]] = {}
    for r in rows:
        by.setdefault(str(r["oracle"]), []).append(float(r[value]))
    return [(k, float(np.mean(v)), float(np.std(v)), len(v)) for k, v in sorted(by.items())]


def markdown_summary(tables: dict[str, list[dict]], provenance: dict | None = None) -> str:
    lines = ["# Districting experiment summary", ""]
    spec = [("rmse", "rmse", "Estimator RMSE on held-out test districts"),
            ("gaps", "gap_percent", "Test-cost gap (%) to the reference solution"),
            ("compactness", "compactness", "Mean district Reock compactness"),
            ("back_and_forth", "share_percent", "Back-and-forth share of tour length (%)")]
    for name, col, title in spec:
        lines += [f"## {title}", "", "| oracle | mean | std | n |", "|---|---|---|---|"]
        lines += [f"| {k} | {m:.4f} | {s:.4f} | {n} |" for k, m, s, n in _means(tables[name], col)]
        lines.append("")
    lines += ["Notes:",
              "- Back-and-forth share is the unweighted mean over nonempty (district, scenario) tours.",
              "- Gap reference is the full-knowledge optimum when available, otherwise the best "
              "compared method on the same instance and seed set.",
              "- All methods are evaluated on the same pinned test scenarios.", ""]
    if provenance:
        lines += ["```json", json.dumps(provenance, sort_keys=True, indent=1), "```", ""]
    return "\n".join(lines)


def svg_choropleth(region: RegionModel, solution: Solution, width: int = 600) -> str:
    """Static map: one polygon per unit, filled by district, depot drawn as a dot."""
    xmin, ymin, xmax, ymax = region.bbox
    span = max(xmax - xmin, ymax - ymin) or 1.0
    scale = (width - 20) / span
    height = int(math.ceil((ymax - ymin) * scale)) + 20

    def xy(x, y):
        return f"{10 + (x - xmin) * scale:.2f},{height - 10 - (y - ymin) * scale:.2f}"

    out = [f'<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{height}" '
           f'viewBox="0 0 {width} {height}">']
    for u, ring in enumerate(region.rings):
        d = solution.assignment[u]
        pts = " ".join(xy(x, y) for x, y in ring)
        out.append(f'<polygon points="{pts}" fill="{PALETTE[d % len(PALETTE)]}" stroke="#333" '
                   f'stroke-width="0.5"><title>unit {u} district {d}</title></polygon>')
    cx, cy = xy(*region.depot).split(",")
    out.append(f'<circle cx="{cx}" cy="{cy}" r="5" fill="#000"/>')
    out.append("</svg>")
    return "\n".join(out) + "\n"


def emit_report(results: dict, out_dir, maps: dict | None = None, provenance: dict | None = None) -> list[Path]:
    """Write the CSV tables, a Markdown summary and optional SVG maps; returns paths written.

    ``maps`` maps a file stem to (region, solution).
    """
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    tables = table_rows(results)
    written = []
    for name, header in TABLES.items():
        p = out / f"{name}.csv"
        p.write_text(_csv(header, tables[name]))
        written.append(p)
    p = out / "summary.md"
    p.write_text(markdown_summary(tables, provenance))
    written.append(p)
    for stem, (region, solution) in sorted((maps or {}).items()):
        p = out / f"{stem}.svg"
        p.write_text(svg_choropleth(region, solution))
        written.append(p)
    return written


# -- manifests -------------------------------------------------------------------

@dataclass
class ExperimentManifest:
    name: str = "experiment"
    regions: list = field(default_factory=lambda: [{"kind": "grid", "width": 4, "height": 5, "seed": 0}])
    t_values: list = field(default_factory=lambda: [3])
    depots: list = field(default_factory=lambda: ["C"])
    seeds: list = field(default_factory=lambda: [0])
    oracles: list = field(default_factory=lambda: ["bhhd", "fig", "snn", "gnn"])
    scenario_seed: int = 0
    test_seed: int = 1
    n_train_scenarios: int = 16
    n_test_scenarios: int = 16
    n_districts: int = 90
    n_test_districts: int = 20
    split: tuple = (8, 1)
    budget_iters: int = 20
    p_rm: float = 0.015
    gnn: dict = field(default_factory=lambda: {"epochs": 100})
    snn_epochs: int = 200
    exact: bool = True
    out_dir: str = "out"

    def validate(self, base: Path | None = None) -> list[str]:
        from .oracles import KINDS
        problems = []
        for r in self.regions:
            if "path" in r:
                p = Path(r["path"])
                if not p.is_absolute() and base is not None:
                    p = base / p
                if not p.exists():
                    problems.append(f"region file {p} does not exist")
            elif r.get("kind") not in ("grid", "synthetic"):
                problems.append(f"region entry {r} needs a path or kind grid|synthetic")
        problems += [f"unknown oracle {k}" for k in self.oracles if k not in KINDS]
        if self.test_seed == self.scenario_seed:
            problems.append("test_seed must differ from scenario_seed")
        if not self.seeds:
            problems.append("no seeds given")
        return problems

    def to_dict(self) -> dict:
        d = asdict(self)
        d["split"] = list(self.split)
        return d

    @classmethod
    def from_dict(cls, doc: dict) -> "ExperimentManifest":
        known = set(cls.__dataclass_fields__)
        unknown = sorted(set(doc) - known)
        if unknown:
            raise BenchError(f"unknown manifest fields {unknown}")
        m = cls(**doc)
        m.split = tuple(m.split)
        return m

    @classmethod
    def load(cls, path) -> "ExperimentManifest":
        return cls.from_dict(json.loads(Path(path).read_text()))


def _build_region(spec: dict, base: Path | None) -> RegionModel:
    from .region import grid_region, load_region, synthetic_city
    if "path" in spec:
        p = Path(spec["path"])
        return load_region(p if p.is_absolute() or base is None else base / p)
    if spec["kind"] == "grid":
        return grid_region(int(spec["width"]), int(spec["height"]), seed=int(spec.get("seed", 0)))
    return synthetic_city(int(spec["n"]), seed=int(spec.get("seed", 0)))


def run_manifest(manifest: ExperimentManifest, base: Path | None = None, workers: int = 1,
                 log=None) -> dict:
    """Run every declared step and write all artifacts under ``manifest.out_dir``.

    Steps per instance: scenario sampling (train and pinned test), district
    labelling, oracle training and RMSE, ILS per oracle and seed, evaluation
    on the test split, optional full-knowledge optimum, and the report.
    """
    from .exact import solve_exact
    from .ils import solve_ils
    from .oracles import GNNConfig, FeatureContext, LookupOracle, evaluate_rmse, save_model, train_oracle
    from .partition import make_instance, save_instance, save_solution
    from .provenance import provenance
    from .region import save_region
    from .saa import build_labeled_dataset, label_districts
    from .scenario import sample_scenarios, save_scenarios
    from .exact import enumerate_districts, ExactError

    problems = manifest.validate(base)
    if problems:
        raise BenchError("; ".join(problems))
    say = log or (lambda msg: None)
    out = Path(manifest.out_dir)
    if base is not None and not out.is_absolute():
        out = base / out
    out.mkdir(parents=True, exist_ok=True)
    prov = provenance("run", manifest=manifest.to_dict())
    (out / "manifest.json").write_text(json.dumps(manifest.to_dict(), sort_keys=True, indent=1) + "\n")
    results = {"rmse": [], "solutions": [], "reference": {}}
    maps = {}
    gcfg = GNNConfig(**manifest.gnn)
    for ri, rspec in enumerate(manifest.regions):
        region0 = _build_region(rspec, base)
        for t in manifest.t_values:
            for tag in manifest.depots:
                cfg = make_instance(region0, int(t), tag, seed=manifest.scenario_seed)
                iid = f"r{ri}_{tag}_{cfg.region.n}_{t}"
                d = out / iid
                d.mkdir(exist_ok=True)
                save_region(cfg.region, d / "region.json", prov)
                cfg = make_instance(cfg.region, int(t), tag, seed=manifest.scenario_seed, region_path="region.json")
                save_instance(cfg, d / "instance.json", prov)
                say(f"{iid}: sampling scenarios")
                train = sample_scenarios(cfg.region, cfg.kappa, manifest.n_train_scenarios, manifest.scenario_seed, "train")
                test = sample_scenarios(cfg.region, cfg.kappa, manifest.n_test_scenarios, manifest.test_seed, "test")
                save_scenarios(train, d / "scenarios_train.jsonl", prov)
                save_scenarios(test, d / "scenarios_test.jsonl", prov)
                say(f"{iid}: labelling {manifest.n_districts} districts")
                ds = build_labeled_dataset(cfg.region, train, cfg.n_lo, cfg.n_hi, manifest.n_districts,
                                           manifest.scenario_seed, tuple(manifest.split), workers=workers)
                held = build_labeled_dataset(cfg.region, test, cfg.n_lo, cfg.n_hi, manifest.n_test_districts,
                                             manifest.scenario_seed + 7919, role="test", workers=workers,
                                             exclude=ds.districts)
                ds.header["provenance"] = prov
                held.header["provenance"] = prov
                ds.save(d / "dataset.jsonl")
                held.save(d / "test_districts.jsonl")
                context = FeatureContext.from_scenarios(cfg.region, train)
                if manifest.exact:
                    try:
                        cands = enumerate_districts(cfg.region, cfg.n_lo, cfg.n_hi, cap=20_000)
                        costs = label_districts(cfg.region, test, cands, workers=workers)
                        ref = solve_exact(cfg, LookupOracle(dict(zip(cands, costs))))
                        results["reference"][iid] = ref.value
                        save_solution(ref.solution(cfg.region.n), d / "solution_full_knowledge.json", prov)
                    except ExactError as exc:
                        say(f"{iid}: no full-knowledge reference ({exc})")
                for seed in manifest.seeds:
                    for kind in manifest.oracles:
                        say(f"{iid}: {kind} seed {seed}")
                        oracle = train_oracle(kind, ds.records, context, seed=seed, gnn_config=gcfg,
                                              snn_epochs=manifest.snn_epochs)
                        save_model(oracle, d / f"model_{kind}_s{seed}.json", prov)
                        results["rmse"].append({"instance": iid, "oracle": kind, "seed": seed,
                                                "rmse": evaluate_rmse(oracle, held.records)})
                        sol, slog = solve_ils(cfg, oracle, seed=seed, budget_iters=manifest.budget_iters,
                                              p_rm=manifest.p_rm)
                        ev = evaluate_solution(cfg.region, sol, test)
                        sol.meta.update(test_cost=ev.test_cost, compactness=ev.compactness,
                                        back_and_forth=ev.back_and_forth)
                        save_solution(sol, d / f"solution_{kind}_s{seed}.json", prov)
                        # the search log carries wall-clock seconds, so it is the one non-reproducible file
                        (d / f"log_{kind}_s{seed}.csv").write_text(slog.to_csv())
                        results["solutions"].append({
                            "instance": iid, "oracle": kind, "seed": seed,
                            "oracle_cost": sol.meta["oracle_cost"], "test_cost": ev.test_cost,
                            "compactness": ev.compactness, "back_and_forth": ev.back_and_forth})
                        maps[f"{iid}_{kind}_s{seed}"] = (cfg.region, sol)
    emit_report(results, out / "report", maps, prov)
    (out / "results.json").write_text(json.dumps(results, sort_keys=True, indent=1) + "\n")
    return results
