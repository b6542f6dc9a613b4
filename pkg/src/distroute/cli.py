"""Command-line interface: one subcommand per pipeline step.

Exit codes: 0 success, 2 validation failure (bad input, infeasible
instance), 1 internal error.
"""
from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path

from . import __version__

log = logging.getLogger("distroute")


class ValidationError(ValueError):
    pass


def _pair(text: str, sep: str, name: str) -> tuple[int, int]:
    try:
        a, b = text.lower().split(sep)
        return int(a), int(b)
    except ValueError:
        raise ValidationError(f"{name}: expected A{sep}B with integers, got {text!r}") from None


def _write_json(path, doc) -> None:
    Path(path).write_text(json.dumps(doc, sort_keys=True) + "\n")


# -- subcommands -------------------------------------------------------------------

def cmd_gen_region(args, prov):
    from .region import grid_region, save_region, synthetic_city
    if bool(args.grid) == bool(args.synthetic_city):
        raise ValidationError("give exactly one of --grid WxH or --synthetic-city N")
    if args.grid:
        w, h = _pair(args.grid, "x", "--grid")
        if w < 1 or h < 1:
            raise ValidationError("--grid dimensions must be positive")
        region = grid_region(w, h, seed=args.seed)
    else:
        if args.synthetic_city < 2:
            raise ValidationError("--synthetic-city needs at least 2 units")
        region = synthetic_city(args.synthetic_city, seed=args.seed)
    save_region(region, args.out, prov)
    log.info("region with %d units and %d edges -> %s", region.n, len(region.edges), args.out)


def cmd_instance(args, prov):
    from .partition import make_instance, save_instance
    from .region import load_region
    region = load_region(args.region)
    depot = args.depot
    if "," in depot:
        try:
            depot = [float(v) for v in depot.split(",")]
        except ValueError:
            raise ValidationError(f"--depot: expected a tag or x,y, got {args.depot!r}") from None
    out = Path(args.out)
    rel = Path(args.region).resolve()
    try:
        rel = rel.relative_to(out.resolve().parent)
    except ValueError:
        pass
    cfg = make_instance(region, args.t, depot, seed=args.seed, time_budget=args.time_budget, region_path=str(rel))
    save_instance(cfg, out, prov)
    log.info("instance k=%d bounds [%d, %d] -> %s", cfg.k, cfg.n_lo, cfg.n_hi, out)


def cmd_sample(args, prov):
    from .partition import load_instance
    from .scenario import sample_scenarios, save_scenarios
    cfg = load_instance(args.instance)
    if args.count < 1:
        raise ValidationError("--count must be >= 1")
    scen = sample_scenarios(cfg.region, cfg.kappa, args.count, args.seed, args.split)
    save_scenarios(scen, args.out, prov)


def cmd_label(args, prov):
    from .partition import load_instance
    from .saa import LabeledDataset, build_labeled_dataset
    from .scenario import load_scenarios
    cfg = load_instance(args.instance)
    scen = load_scenarios(args.scenarios)
    if scen.region_id != cfg.region.fingerprint():
        raise ValidationError("scenario file was sampled for a different region")
    role = "test" if scen.split == "test" else None
    if args.role:
        role = None if args.role == "train" else args.role
    exclude = []
    for path in args.exclude or []:
        exclude += LabeledDataset.load(path).districts
    ratio = _pair(args.split, ":", "--split")
    ds = build_labeled_dataset(cfg.region, scen, cfg.n_lo, cfg.n_hi, args.districts, args.seed,
                               ratio, workers=args.threads, role=role, exclude=exclude)
    ds.header["provenance"] = prov
    ds.save(args.out)
    counts = {r: len(ds.by_role(r)) for r in ("train", "val", "test")}
    log.info("labelled %d districts %s -> %s", len(ds.records), counts, args.out)


def cmd_train(args, prov):
    from .oracles import FeatureContext, GNNConfig, save_model, train_oracle
    from .partition import load_instance
    from .saa import LabeledDataset
    from .scenario import load_scenarios
    cfg = load_instance(args.instance)
    scen = load_scenarios(args.scenarios)
    ds = LabeledDataset.load(args.dataset)
    if ds.header.get("region") not in (None, cfg.region.fingerprint()):
        raise ValidationError("dataset was labelled on a different region")
    context = FeatureContext.from_scenarios(cfg.region, scen)
    gcfg = GNNConfig.full() if args.full_scale else GNNConfig()
    overrides = {k: v for k, v in (("epochs", args.epochs), ("lr", args.lr), ("patience", args.patience))
                 if v is not None}
    gcfg = GNNConfig(**{**gcfg.__dict__, **overrides})
    oracle = train_oracle(args.oracle, ds.records, context, seed=args.seed, gnn_config=gcfg,
                          snn_epochs=args.epochs)
    save_model(oracle, args.out, prov)
    log.info("%s model -> %s", args.oracle, args.out)


def _load_oracle(args, cfg):
    from .oracles import SAAOracle, load_model
    from .scenario import load_scenarios
    cost = getattr(args, "cost", None)
    if cost:
        if cost.startswith("oracle:"):
            return load_model(cost.split(":", 1)[1], cfg.region)
        if cost not in ("saa-test", "saa-train"):
            raise ValidationError(f"--cost: expected saa-test, saa-train or oracle:<model>, got {cost!r}")
        if not args.scenarios:
            raise ValidationError(f"--cost {cost} needs --scenarios")
        scen = load_scenarios(args.scenarios)
        if scen.split != cost[4:]:
            raise ValidationError(f"--cost {cost} but {args.scenarios} holds {scen.split} scenarios")
        return SAAOracle(cfg.region, scen)
    if getattr(args, "oracle_model", None):
        return load_model(args.oracle_model, cfg.region)
    if getattr(args, "scenarios", None):
        return SAAOracle(cfg.region, load_scenarios(args.scenarios))
    raise ValidationError("give --oracle-model or --scenarios")


def cmd_solve(args, prov):
    from .ils import solve_ils
    from .partition import load_instance, save_solution
    cfg = load_instance(args.instance)
    oracle = _load_oracle(args, cfg)
    seconds = args.budget_seconds
    if seconds is None and args.budget_iters is None:
        seconds = cfg.time_budget
    sol, slog = solve_ils(cfg, oracle, seed=args.seed, budget_seconds=seconds, budget_iters=args.budget_iters,
                          p_rm=args.p_rm)
    save_solution(sol, args.out, prov)
    if args.log:
        Path(args.log).write_text(slog.to_csv())
    log.info("best oracle cost %.4f after %d iterations -> %s", sol.meta["oracle_cost"], slog.iterations, args.out)


def cmd_exact(args, prov):
    from .exact import solve_exact
    from .partition import load_instance, save_solution
    cfg = load_instance(args.instance)
    oracle = _load_oracle(args, cfg)
    res = solve_exact(cfg, oracle, cap=args.cap)
    sol = res.solution(cfg.region.n)
    sol.meta = {"oracle_cost": res.value, "candidates": res.candidates, "nodes": res.nodes, **res.meta}
    save_solution(sol, args.out, prov)
    log.info("optimum %.4f over %d candidate districts -> %s", res.value, res.candidates, args.out)


def cmd_eval(args, prov):
    from .bench import evaluate_solution
    from .oracles import evaluate_rmse, load_model
    from .partition import load_instance, load_solution, validate_solution
    from .saa import LabeledDataset
    from .scenario import load_scenarios
    cfg = load_instance(args.instance)
    instance_id = cfg.name
    results = {"rmse": [], "solutions": [], "reference": {}, "provenance": prov}
    if args.models:
        if not args.dataset:
            raise ValidationError("--models needs --dataset with held-out districts")
        held = LabeledDataset.load(args.dataset).by_role("test")
        if not held:
            raise ValidationError(f"{args.dataset} has no test-role districts")
        for path in args.models:
            oracle = load_model(path, cfg.region)
            results["rmse"].append({"instance": instance_id, "oracle": oracle.kind,
                                    "seed": int(oracle.meta.get("seed", 0)),
                                    "rmse": evaluate_rmse(oracle, held)})
    if args.solutions:
        if not args.scenarios:
            raise ValidationError("--solutions needs --scenarios from the test split")
        test = load_scenarios(args.scenarios)
        for path in args.solutions:
            sol = load_solution(path)
            problems = validate_solution(sol, cfg)
            if problems:
                raise ValidationError(f"{path}: " + "; ".join(problems))
            ev = evaluate_solution(cfg.region, sol, test)
            results["solutions"].append({"instance": instance_id, "oracle": sol.meta.get("oracle", Path(path).stem),
                                         "seed": int(sol.meta.get("seed", 0)),
                                         "oracle_cost": float(sol.meta.get("oracle_cost", float("nan"))),
                                         "test_cost": ev.test_cost, "compactness": ev.compactness,
                                         "back_and_forth": ev.back_and_forth})
    if args.reference:
        sol = load_solution(args.reference)
        test = load_scenarios(args.scenarios)
        results["reference"][instance_id] = evaluate_solution(cfg.region, sol, test).test_cost
    _write_json(args.out, results)
    for r in results["rmse"]:
        print(f"{r['oracle']}\trmse={r['rmse']:.6f}")
    for r in results["solutions"]:
        print(f"{r['oracle']}\ttest_cost={r['test_cost']:.6f}")


def cmd_report(args, prov):
    from .bench import emit_report
    from .partition import load_instance, load_solution
    merged = {"rmse": [], "solutions": [], "reference": {}}
    for path in args.results:
        doc = json.loads(Path(path).read_text())
        merged["rmse"] += doc.get("rmse", [])
        merged["solutions"] += doc.get("solutions", [])
        merged["reference"].update(doc.get("reference", {}))
    maps = {}
    if args.solutions:
        if not args.instance:
            raise ValidationError("--solutions needs --instance to draw maps")
        cfg = load_instance(args.instance)
        for path in args.solutions:
            maps[Path(path).stem] = (cfg.region, load_solution(path))
    for p in emit_report(merged, args.out_dir, maps, prov):
        print(p)


def cmd_run(args, prov):
    from .bench import ExperimentManifest, run_manifest
    path = Path(args.manifest)
    manifest = ExperimentManifest.load(path)
    if args.out_dir:
        manifest.out_dir = args.out_dir
    run_manifest(manifest, base=path.parent, workers=args.threads, log=log.info)


# -- parser ----------------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    # global flags are accepted before or after the subcommand
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--json-errors", action="store_true", default=argparse.SUPPRESS,
                        help="report errors as one JSON object on stderr")
    common.add_argument("--threads", type=int, default=argparse.SUPPRESS,
                        help="worker processes for labelling (default 1, serial)")
    common.add_argument("-v", "--verbose", action="store_true", default=argparse.SUPPRESS,
                        help="log progress to stderr")
    p = argparse.ArgumentParser(prog="distroute", description=__doc__.splitlines()[0], parents=[common])
    p.add_argument("--version", action="version", version=f"distroute {__version__}")
    sub = p.add_subparsers(dest="command", required=True)
    _add = sub.add_parser

    def add_parser(name, **kw):
        return _add(name, parents=[common], **kw)

    sub.add_parser = add_parser

    s = sub.add_parser("gen-region", help="generate a grid or synthetic-city region file")
    s.add_argument("--grid", help="grid dimensions WxH")
    s.add_argument("--synthetic-city", type=int, metavar="N", help="Voronoi city with N units")
    s.add_argument("--seed", type=int, default=0)
    s.add_argument("--out", required=True)
    s.set_defaults(func=cmd_gen_region)

    s = sub.add_parser("instance", help="derive an instance (t, bounds, k, depot) from a region")
    s.add_argument("--region", required=True)
    s.add_argument("--t", type=int, required=True, help="target district size")
    s.add_argument("--depot", default="C", help="C, NE, NW, SE, SW or explicit x,y")
    s.add_argument("--time-budget", type=float, default=180.0, help="default search seconds")
    s.add_argument("--seed", type=int, default=0)
    s.add_argument("--out", required=True)
    s.set_defaults(func=cmd_instance)

    s = sub.add_parser("sample", help="sample demand scenarios for one split")
    s.add_argument("--instance", required=True)
    s.add_argument("--split", choices=("train", "test"), required=True)
    s.add_argument("--count", type=int, default=100, help="number of scenarios")
    s.add_argument("--seed", type=int, default=0)
    s.add_argument("--out", required=True)
    s.set_defaults(func=cmd_sample)

    s = sub.add_parser("label", help="sample random connected districts and label them by SAA")
    s.add_argument("--instance", required=True)
    s.add_argument("--scenarios", required=True)
    s.add_argument("--districts", type=int, required=True, help="number of districts")
    s.add_argument("--split", default="8:1", help="train:val ratio (default 8:1)")
    s.add_argument("--role", choices=("train", "test"), help="override the role implied by the scenario split")
    s.add_argument("--exclude", nargs="*", help="datasets whose districts must not be drawn again")
    s.add_argument("--seed", type=int, default=0)
    s.add_argument("--out", required=True)
    s.set_defaults(func=cmd_label)

    s = sub.add_parser("train", help="calibrate or train one cost oracle")
    s.add_argument("--instance", required=True)
    s.add_argument("--scenarios", required=True, help="train-split scenarios (feature context)")
    s.add_argument("--dataset", required=True)
    s.add_argument("--oracle", choices=("bhhd", "fig", "snn", "gnn"), required=True)
    s.add_argument("--epochs", type=int, help="network epochs (default: desk-scale value)")
    s.add_argument("--lr", type=float, help="GNN learning rate")
    s.add_argument("--patience", type=int, help="GNN early-stopping patience")
    s.add_argument("--full-scale", action="store_true", help="GNN widths 64/1024/100, 10000 epochs, lr 1e-4")
    s.add_argument("--seed", type=int, default=0)
    s.add_argument("--out", required=True)
    s.set_defaults(func=cmd_train)

    s = sub.add_parser("solve", help="iterated local search with a trained oracle")
    s.add_argument("--instance", required=True)
    s.add_argument("--oracle-model")
    s.add_argument("--scenarios", help="price districts by SAA on these scenarios instead of a model")
    s.add_argument("--seed", type=int, default=0)
    s.add_argument("--budget-seconds", type=float)
    s.add_argument("--budget-iters", type=int)
    s.add_argument("--p-rm", type=float, default=0.015, help="perturbation move probability")
    s.add_argument("--log", help="CSV search log (iter,oracle_cost,seconds)")
    s.add_argument("--out", required=True)
    s.set_defaults(func=cmd_solve)

    s = sub.add_parser("exact", help="exact set partitioning on a small instance")
    s.add_argument("--instance", required=True)
    s.add_argument("--oracle-model")
    s.add_argument("--scenarios", help="price districts by SAA on these scenarios instead of a model")
    s.add_argument("--cost", help="saa-test, saa-train (both with --scenarios) or oracle:<model file>")
    s.add_argument("--cap", type=int, default=200_000, help="maximum candidate districts")
    s.add_argument("--out", required=True)
    s.set_defaults(func=cmd_exact)

    s = sub.add_parser("eval", help="RMSE of models and test-split costs of solutions")
    s.add_argument("--instance", required=True)
    s.add_argument("--models", nargs="*")
    s.add_argument("--dataset", help="dataset with test-role districts")
    s.add_argument("--solutions", nargs="*")
    s.add_argument("--scenarios", help="test-split scenarios")
    s.add_argument("--reference", help="full-knowledge solution for gap computation")
    s.add_argument("--out", required=True)
    s.set_defaults(func=cmd_eval)

    s = sub.add_parser("report", help="CSV tables, Markdown summary and SVG maps from eval results")
    s.add_argument("--results", nargs="+", required=True)
    s.add_argument("--instance")
    s.add_argument("--solutions", nargs="*")
    s.add_argument("--out-dir", required=True)
    s.set_defaults(func=cmd_report)

    s = sub.add_parser("run", help="run a whole experiment manifest")
    s.add_argument("--manifest", required=True)
    s.add_argument("--out-dir", help="override the manifest output directory")
    s.set_defaults(func=cmd_run)
    return p


def _validation_types() -> tuple:
    from .bench import BenchError
    from .exact import ExactError
    from .geometry import GeometryError
    from .oracles import OracleError
    from .oracles.features import FeatureError
    from .partition import ConstructionError, InstanceError
    from .region import RegionError
    from .saa import DatasetError
    from .scenario import ScenarioError
    return (ValidationError, BenchError, ExactError, GeometryError, OracleError, FeatureError, ConstructionError,
            InstanceError, RegionError, DatasetError, ScenarioError, FileNotFoundError, json.JSONDecodeError)


def main(argv=None) -> int:
    from .provenance import provenance
    parser = build_parser()
    args = parser.parse_args(argv)
    for name, default in (("json_errors", False), ("threads", 1), ("verbose", False)):
        if not hasattr(args, name):
            setattr(args, name, default)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(message)s", stream=sys.stderr)
    config = {k: v for k, v in vars(args).items() if k not in ("func", "command", "verbose", "json_errors")}
    try:
        if args.threads < 1:
            raise ValidationError("--threads must be >= 1")
        args.func(args, provenance(args.command, **config))
    except _validation_types() as exc:
        return _fail(args, exc, 2)
    except Exception as exc:  # noqa: BLE001 - reported as an internal error
        if args.verbose:
            log.exception("internal error")
        return _fail(args, exc, 1)
    return 0


def _fail(args, exc: Exception, code: int) -> int:
    if args.json_errors:
        sys.stderr.write(json.dumps({"error": type(exc).__name__, "message": str(exc), "exit_code": code}) + "\n")
    else:
        sys.stderr.write(f"distroute {args.command}: {type(exc).__name__}: {exc}\n")
    return code


if __name__ == "__main__":
    sys.exit(main())
