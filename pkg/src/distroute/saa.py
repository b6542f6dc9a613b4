"""Sample-average cost estimates for districts and labelled district corpora."""
from __future__ import annotations

import json
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

from .region import RegionModel
from .scenario import ScenarioSet, district_scenario
from .tsp import tsp_exact, tsp_length


class DatasetError(ValueError):
    pass


def _tour(depot, pts, exact: bool) -> float:
    if exact:
        return tsp_exact(depot, pts).length
    return tsp_length(depot, pts)


def scenario_costs(region: RegionModel, district: Iterable[int], scenarios: ScenarioSet,
                   exact: bool = False) -> np.ndarray:
    """Tour length of the compounded district demand, one entry per scenario."""
    members = sorted(district)
    return np.array([_tour(region.depot, district_scenario(scenarios, members, t), exact)
                     for t in range(scenarios.count)])


def saa_district_cost(region: RegionModel, district: Iterable[int], scenarios: ScenarioSet,
                      exact: bool = False) -> float:
    if scenarios.count == 0:
        raise DatasetError("empty scenario set")
    if scenarios.n_units != region.n:
        raise DatasetError("scenario set does not match the region")
    return float(scenario_costs(region, district, scenarios, exact).mean())


def saa_solution_cost(region: RegionModel, districts: Sequence[Iterable[int]], scenarios: ScenarioSet) -> float:
    """Sum of district SAA costs; ``districts`` must partition the region."""
    districts = [frozenset(d) for d in districts]
    seen = [u for d in districts for u in d]
    if sorted(seen) != list(range(region.n)):
        raise DatasetError("districts do not partition the region")
    return float(sum(saa_district_cost(region, d, scenarios) for d in districts))


# -- random connected districts -------------------------------------------------

def grow_district(neighbors, size: int, start: int, rng: np.random.Generator,
                  allowed: set[int] | None = None) -> frozenset | None:
    """Random frontier expansion from ``start``; None if the component is too small."""
    members = {start}
    frontier = {w for w in neighbors[start] if allowed is None or w in allowed}
    while len(members) < size:
        if not frontier:
            return None
        pick = sorted(frontier)[int(rng.integers(len(frontier)))]
        members.add(pick)
        frontier.discard(pick)
        frontier.update(w for w in neighbors[pick]
                        if w not in members and (allowed is None or w in allowed))
    return frozenset(members)


def sample_random_districts(region: RegionModel, n_lo: int, n_hi: int, count: int, seed: int,
                            exclude: Iterable[frozenset] = (), max_attempts: int | None = None) -> list[frozenset]:
    """``count`` distinct connected districts with size uniform in [n_lo, n_hi]."""
    if not 1 <= n_lo <= n_hi <= region.n:
        raise DatasetError(f"bad size bounds [{n_lo}, {n_hi}] for {region.n} units")
    rng = np.random.default_rng(seed)
    seen = set(frozenset(d) for d in exclude)
    out: list[frozenset] = []
    attempts = 0
    limit = max_attempts if max_attempts is not None else 50 * count + 1000
    while len(out) < count:
        if attempts >= limit:
            raise DatasetError(f"could only sample {len(out)} of {count} distinct districts")
        attempts += 1
        size = int(rng.integers(n_lo, n_hi + 1))
        start = int(rng.integers(region.n))
        d = grow_district(region.neighbors, size, start, rng)
        if d is None or d in seen:
            continue
        seen.add(d)
        out.append(d)
    return out


# -- labelled datasets ------------------------------------------------------------

@dataclass(frozen=True)
class LabeledDistrict:
    members: tuple[int, ...]
    cost: float
    role: str = "train"  # train | val | test


@dataclass
class LabeledDataset:
    records: list[LabeledDistrict]
    header: dict = field(default_factory=dict)

    def by_role(self, *roles: str) -> list[LabeledDistrict]:
        return [r for r in self.records if r.role in roles]

    @property
    def districts(self) -> list[frozenset]:
        return [frozenset(r.members) for r in self.records]

    def save(self, path) -> None:
        with open(path, "w") as fh:
            fh.write(json.dumps({"kind": "dataset", **self.header}, sort_keys=True) + "\n")
            for r in self.records:
                fh.write(json.dumps({"members": list(r.members), "cost": r.cost, "role": r.role},
                                    sort_keys=True) + "\n")

    @classmethod
    def load(cls, path) -> "LabeledDataset":
        lines = Path(path).read_text().splitlines()
        if not lines:
            raise DatasetError(f"{path}: empty dataset file")
        header = json.loads(lines[0])
        if header.pop("kind", None) != "dataset":
            raise DatasetError(f"{path}: line 1: not a dataset header")
        records = []
        for lineno, line in enumerate(lines[1:], start=2):
            try:
                rec = json.loads(line)
                records.append(LabeledDistrict(tuple(int(u) for u in rec["members"]),
                                               float(rec["cost"]), str(rec["role"])))
            except (json.JSONDecodeError, KeyError, ValueError) as exc:
                raise DatasetError(f"{path}: line {lineno}: {exc}") from None
        return cls(records, header)


_WORKER: dict = {}


def _init_worker(region, scenarios):
    _WORKER["region"] = region
    _WORKER["scenarios"] = scenarios


def _label_one(members):
    return saa_district_cost(_WORKER["region"], members, _WORKER["scenarios"])


def label_districts(region: RegionModel, scenarios: ScenarioSet, districts: Sequence[frozenset],
                    workers: int = 1) -> list[float]:
    """SAA cost for each district; identical results for any worker count."""
    if workers <= 1:
        return [saa_district_cost(region, d, scenarios) for d in districts]
    with ProcessPoolExecutor(workers, initializer=_init_worker, initargs=(region, scenarios)) as pool:
        return list(pool.map(_label_one, [tuple(sorted(d)) for d in districts], chunksize=16))


def split_roles(count: int, ratio: tuple[int, int], seed: int) -> list[str]:
    train_w, val_w = ratio
    n_val = (count * val_w) // (train_w + val_w)
    roles = ["train"] * count
    for i in np.random.default_rng(seed).permutation(count)[:n_val]:
        roles[int(i)] = "val"
    return roles


def build_labeled_dataset(region: RegionModel, scenarios: ScenarioSet, n_lo: int, n_hi: int,
                          count: int, seed: int, ratio: tuple[int, int] = (8, 1),
                          workers: int = 1, role: str | None = None,
                          exclude: Iterable[frozenset] = ()) -> LabeledDataset:
    """Sample ``count`` districts and label them with SAA on ``scenarios``.

    Train-split labels are divided into train/val by ``ratio``; passing
    ``role="test"`` labels everything as held-out evaluation data instead.
    """
    districts = sample_random_districts(region, n_lo, n_hi, count, seed, exclude=exclude)
    costs = label_districts(region, scenarios, districts, workers)
    roles = [role] * count if role else split_roles(count, ratio, seed)
    records = [LabeledDistrict(tuple(sorted(d)), float(c), r) for d, c, r in zip(districts, costs, roles)]
    header = {
        "region": region.fingerprint(),
        "seed": int(seed),
        "n_lo": int(n_lo),
        "n_hi": int(n_hi),
        "count": int(count),
        "ratio": list(ratio),
        "scenario_split": scenarios.split,
        "scenario_seed": scenarios.seed,
        "scenario_count": scenarios.count,
        "kappa": scenarios.kappa,
    }
    return LabeledDataset(records, header)
