"""Demand scenarios: spatial Poisson requests inside each basic unit.

Every (split, unit, scenario) triple gets its own Philox stream, keyed by
``numpy.random.SeedSequence([seed, split_code, unit, t])``. SeedSequence hashes
its entropy words, so streams are independent and identical on every platform.
"""
from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

from . import geometry as geo
from .region import RegionModel

SPLITS = {"train": 1, "test": 2}


class ScenarioError(ValueError):
    pass


def substream(seed: int, split: str, unit: int, t: int) -> np.random.Generator:
    if split not in SPLITS:
        raise ScenarioError(f"unknown split {split!r}")
    ss = np.random.SeedSequence([int(seed), SPLITS[split], int(unit), int(t)])
    return np.random.Generator(np.random.Philox(ss))


def sample_in_polygon(ring: np.ndarray, count: int, rng: np.random.Generator) -> np.ndarray:
    """``count`` uniform points inside ``ring`` by bounding-box rejection."""
    if count == 0:
        return np.empty((0, 2))
    xmin, ymin = ring.min(axis=0)
    xmax, ymax = ring.max(axis=0)
    out = []
    have = 0
    while have < count:
        batch = max(8, 2 * (count - have))
        pts = np.column_stack([rng.uniform(xmin, xmax, batch), rng.uniform(ymin, ymax, batch)])
        pts = pts[geo.points_in_polygon(pts, ring)]
        out.append(pts)
        have += len(pts)
    return np.vstack(out)[:count]


@dataclass(frozen=True)
class ScenarioSet:
    split: str
    per_unit: tuple[tuple[np.ndarray, ...], ...]  # [unit][t] -> (m, 2)
    seed: int
    kappa: float
    region_id: str = ""

    @property
    def count(self) -> int:
        return len(self.per_unit[0]) if self.per_unit else 0

    @property
    def n_units(self) -> int:
        return len(self.per_unit)

    def request_counts(self) -> np.ndarray:
        """(n_units, count) matrix of request counts."""
        return np.array([[len(p) for p in unit] for unit in self.per_unit], dtype=int)


def sample_scenarios(region: RegionModel, kappa: float, count: int, seed: int,
                     split: str = "train") -> ScenarioSet:
    """Poisson(kappa * population) requests per unit and scenario, uniform in the unit."""
    if not kappa > 0:
        raise ScenarioError("kappa must be positive")
    if count < 1:
        raise ScenarioError("scenario count must be >= 1")
    per_unit = []
    for u in region.units:
        ring = np.asarray(u.boundary)
        lam = kappa * u.population
        scen = []
        for t in range(count):
            rng = substream(seed, split, u.id, t)
            scen.append(sample_in_polygon(ring, int(rng.poisson(lam)), rng))
        per_unit.append(tuple(scen))
    return ScenarioSet(split, tuple(per_unit), int(seed), float(kappa), region.fingerprint())


def district_scenario(scenarios: ScenarioSet, district: Iterable[int], t: int) -> np.ndarray:
    """Compound the member units' requests for scenario ``t``."""
    if not 0 <= t < scenarios.count:
        raise ScenarioError(f"scenario index {t} out of range [0, {scenarios.count})")
    parts = []
    for u in sorted(district):
        if not 0 <= u < scenarios.n_units:
            raise ScenarioError(f"unknown unit id {u}")
        parts.append(scenarios.per_unit[u][t])
    if not parts:
        return np.empty((0, 2))
    return np.vstack(parts)


# -- files ---------------------------------------------------------------------

def save_scenarios(scenarios: ScenarioSet, path, provenance: dict | None = None) -> None:
    header = {
        "kind": "scenarios",
        "split": scenarios.split,
        "seed": scenarios.seed,
        "kappa": scenarios.kappa,
        "count": scenarios.count,
        "n_units": scenarios.n_units,
        "region": scenarios.region_id,
    }
    if provenance:
        header["provenance"] = provenance
    with open(path, "w") as fh:
        fh.write(json.dumps(header, sort_keys=True) + "\n")
        for u, scen in enumerate(scenarios.per_unit):
            for t, pts in enumerate(scen):
                rec = {"split": scenarios.split, "unit": u, "t": t, "points": pts.tolist()}
                fh.write(json.dumps(rec, sort_keys=True) + "\n")


def load_scenarios(path) -> ScenarioSet:
    lines = Path(path).read_text().splitlines()
    if not lines:
        raise ScenarioError(f"{path}: empty scenario file")
    try:
        header = json.loads(lines[0])
    except json.JSONDecodeError as exc:
        raise ScenarioError(f"{path}: line 1: {exc.msg}") from None
    if header.get("kind") != "scenarios":
        raise ScenarioError(f"{path}: line 1: not a scenario header")
    n_units, count = int(header["n_units"]), int(header["count"])
    grid: list[list[np.ndarray | None]] = [[None] * count for _ in range(n_units)]
    for lineno, line in enumerate(lines[1:], start=2):
        try:
            rec = json.loads(line)
            pts = np.asarray(rec["points"], dtype=float).reshape(-1, 2)
            grid[int(rec["unit"])][int(rec["t"])] = pts
        except (json.JSONDecodeError, KeyError, IndexError, ValueError) as exc:
            raise ScenarioError(f"{path}: line {lineno}: {exc}") from None
    for u in range(n_units):
        for t in range(count):
            if grid[u][t] is None:
                raise ScenarioError(f"{path}: missing record for unit {u}, scenario {t}")
    return ScenarioSet(header["split"], tuple(tuple(s) for s in grid), int(header["seed"]),
                       float(header["kappa"]), header.get("region", ""))
