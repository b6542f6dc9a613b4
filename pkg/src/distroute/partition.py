"""Instances, solutions, and construction of a first feasible k-partition.

The constructor searches the same space as the balanced connected
k-partition flow model: every district is a tree of flow rooted at one unit,
its size (the flow injected by its source) lies in [n_lo, n_hi], and every
unit receives flow from exactly one source. The search picks a root, grows a
connected district around it, checks that what is left can still be split
into the remaining number of districts, and backtracks on dead ends.
"""
from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Iterator, Sequence

import numpy as np

from .region import RegionModel, components, is_connected, load_region

DEPOT_TAGS = ("C", "NE", "NW", "SE", "SW")
DEPOT_OFFSET = 0.35


class InstanceError(ValueError):
    pass


class ConstructionError(RuntimeError):
    pass


def size_bounds(t: int) -> tuple[int, int]:
    """(floor(0.8 t), ceil(1.2 t)) in exact integer arithmetic."""
    return (8 * t) // 10, -((-12 * t) // 10)


def request_probability(t: int) -> float:
    return 96.0 / (8000.0 * t)


def district_count(n: int, t: int, n_lo: int, n_hi: int) -> int:
    target = math.floor(n / t + 0.5)
    feasible = [k for k in range(1, n + 1) if k * n_lo <= n <= k * n_hi]
    if not feasible:
        raise InstanceError(f"no district count k satisfies k*{n_lo} <= {n} <= k*{n_hi}")
    return min(feasible, key=lambda k: (abs(k - target), k))


def depot_location(region: RegionModel, tag: str) -> tuple[float, float]:
    if tag not in DEPOT_TAGS:
        raise InstanceError(f"unknown depot tag {tag!r}; expected one of {DEPOT_TAGS}")
    cx, cy = region.centroid
    xmin, ymin, xmax, ymax = region.bbox
    dx = DEPOT_OFFSET * (xmax - xmin) / 2.0
    dy = DEPOT_OFFSET * (ymax - ymin) / 2.0
    sx = {"C": 0, "NE": 1, "SE": 1, "NW": -1, "SW": -1}[tag]
    sy = {"C": 0, "NE": 1, "NW": 1, "SE": -1, "SW": -1}[tag]
    return cx + sx * dx, cy + sy * dy


@dataclass(frozen=True)
class InstanceConfig:
    region: RegionModel
    t: int
    n_lo: int
    n_hi: int
    k: int
    kappa: float
    depot_tag: str
    depot: tuple[float, float]
    time_budget: float = 180.0
    seed: int = 0
    region_path: str = ""

    def __post_init__(self):
        n = self.region.n
        if self.n_lo < 1:
            raise InstanceError("n_lo must be >= 1")
        if not self.k * self.n_lo <= n <= self.k * self.n_hi:
            raise InstanceError(f"infeasible: k*n_lo <= n <= k*n_hi fails for k={self.k}, n={n}, "
                                f"bounds [{self.n_lo}, {self.n_hi}]")

    @property
    def name(self) -> str:
        return f"{self.region.name}_{self.depot_tag}_{self.region.n}_{self.t}"

    def to_dict(self) -> dict:
        return {"region": self.region_path, "region_id": self.region.fingerprint(), "t": self.t,
                "n_lo": self.n_lo, "n_hi": self.n_hi, "k": self.k, "kappa": self.kappa,
                "depot_tag": self.depot_tag, "depot": list(self.depot),
                "time_budget": self.time_budget, "seed": self.seed}


def make_instance(region: RegionModel, t: int, depot_tag: str | Sequence[float] = "C", seed: int = 0,
                  time_budget: float = 180.0, region_path: str = "") -> InstanceConfig:
    if t < 2:
        raise InstanceError("target district size t must be >= 2")
    n_lo, n_hi = size_bounds(t)
    k = district_count(region.n, t, n_lo, n_hi)
    if isinstance(depot_tag, str):
        tag, depot = depot_tag, depot_location(region, depot_tag)
    else:
        tag, depot = "explicit", (float(depot_tag[0]), float(depot_tag[1]))
    return InstanceConfig(region.with_depot(depot), t, n_lo, n_hi, k, request_probability(t), tag,
                          depot, float(time_budget), int(seed), region_path)


def save_instance(config: InstanceConfig, path, provenance: dict | None = None) -> None:
    doc = config.to_dict()
    if provenance:
        doc["provenance"] = provenance
    Path(path).write_text(json.dumps(doc, sort_keys=True) + "\n")


def load_instance(path) -> InstanceConfig:
    path = Path(path)
    doc = json.loads(path.read_text())
    region_path = Path(doc["region"])
    if not region_path.is_absolute():
        region_path = path.parent / region_path
    region = load_region(region_path).with_depot(doc["depot"])
    if doc.get("region_id") and doc["region_id"] != region.fingerprint():
        raise InstanceError(f"{path}: region file {region_path} does not match the instance")
    return InstanceConfig(region, int(doc["t"]), int(doc["n_lo"]), int(doc["n_hi"]), int(doc["k"]),
                          float(doc["kappa"]), doc["depot_tag"], tuple(doc["depot"]),
                          float(doc.get("time_budget", 180.0)), int(doc.get("seed", 0)), doc["region"])


# -- solutions -------------------------------------------------------------------

@dataclass
class Solution:
    assignment: list[int]  # unit id -> district index
    k: int
    meta: dict = field(default_factory=dict)

    @classmethod
    def from_districts(cls, districts: Sequence[Iterable[int]], n: int | None = None) -> "Solution":
        districts = [sorted(d) for d in districts]
        n = n if n is not None else sum(len(d) for d in districts)
        assignment = [-1] * n
        for idx, d in enumerate(districts):
            for u in d:
                assignment[u] = idx
        return cls(assignment, len(districts))

    def districts(self) -> list[frozenset]:
        groups: list[set[int]] = [set() for _ in range(self.k)]
        for u, d in enumerate(self.assignment):
            if 0 <= d < self.k:
                groups[d].add(u)
        return [frozenset(g) for g in groups]

    def canonical(self) -> frozenset:
        return frozenset(d for d in self.districts())

    def copy(self) -> "Solution":
        return Solution(list(self.assignment), self.k, dict(self.meta))

    def to_dict(self) -> dict:
        return {"k": self.k, "assignment": {str(u): d for u, d in enumerate(self.assignment)},
                "meta": self.meta}

    @classmethod
    def from_dict(cls, doc: dict) -> "Solution":
        amap = {int(u): int(d) for u, d in doc["assignment"].items()}
        n = max(amap) + 1 if amap else 0
        return cls([amap.get(u, -1) for u in range(n)], int(doc["k"]), dict(doc.get("meta", {})))


def save_solution(solution: Solution, path, provenance: dict | None = None) -> None:
    doc = solution.to_dict()
    if provenance:
        doc["provenance"] = provenance
    Path(path).write_text(json.dumps(doc, sort_keys=True) + "\n")


def load_solution(path) -> Solution:
    return Solution.from_dict(json.loads(Path(path).read_text()))


def validate_solution(solution: Solution, config: InstanceConfig) -> list[str]:
    """All violated conditions, as readable messages; empty when feasible."""
    region = config.region
    problems = []
    if len(solution.assignment) != region.n:
        problems.append(f"cover: assignment has {len(solution.assignment)} units, region has {region.n}")
    bad = [u for u, d in enumerate(solution.assignment) if not 0 <= d < solution.k]
    if bad:
        problems.append(f"cover: units {bad} are not assigned to a district in [0, {solution.k})")
    if solution.k != config.k:
        problems.append(f"count: solution has k={solution.k}, instance requires k={config.k}")
    for idx, d in enumerate(solution.districts()):
        if not d:
            problems.append(f"count: district {idx} is empty")
            continue
        if not config.n_lo <= len(d) <= config.n_hi:
            problems.append(f"size: district {idx} has {len(d)} units, bounds [{config.n_lo}, {config.n_hi}]")
        valid = [u for u in d if u < region.n]
        comps = components(valid, region.neighbors)
        if len(comps) > 1:
            parts = "; ".join(str(sorted(c)) for c in comps)
            problems.append(f"connectivity: district {idx} splits into components {parts}")
    return problems


# -- construction ----------------------------------------------------------------

def remainder_feasible(rest: set[int], m: int, neighbors, n_lo: int, n_hi: int) -> bool:
    """Can ``rest`` still be cut into exactly ``m`` connected districts?

    Necessary condition checked per connected component: each component of
    size c needs between ceil(c / n_hi) and floor(c / n_lo) districts.
    """
    if not rest:
        return m == 0
    if m <= 0:
        return False
    lo_total = hi_total = 0
    for comp in components(rest, neighbors):
        c = len(comp)
        lo, hi = -(-c // n_hi), c // n_lo
        if lo > hi:
            return False
        lo_total += lo
        hi_total += hi
    return lo_total <= m <= hi_total


def connected_sets(root: int, allowed: set[int], neighbors, n_lo: int, n_hi: int,
                   rng: np.random.Generator) -> Iterator[frozenset]:
    """Every connected subset of ``allowed`` containing ``root`` with size in bounds, once each."""

    def grow(current: frozenset, ext: list[int], forbidden: set[int]):
        if len(current) >= n_lo:
            yield current
        if len(current) == n_hi:
            return
        ext = list(ext)
        forbidden = set(forbidden)
        while ext:
            v = ext.pop(int(rng.integers(len(ext))))
            new_ext = list(ext)
            for w in neighbors[v]:
                if w in allowed and w not in current and w != v and w not in forbidden and w not in new_ext:
                    new_ext.append(w)
            yield from grow(current | {v}, new_ext, forbidden)
            forbidden.add(v)

    start_ext = [w for w in neighbors[root] if w in allowed]
    yield from grow(frozenset([root]), start_ext, {root})


class _Budget(Exception):
    pass


def _construct(config: InstanceConfig, rng: np.random.Generator, node_budget: int) -> list[frozenset] | None:
    region = config.region
    nb = region.neighbors
    rank = {u: int(r) for u, r in enumerate(rng.permutation(region.n))}
    nodes = [0]

    def search(rest: set[int], m: int) -> list[frozenset] | None:
        if not rest:
            return [] if m == 0 else None
        nodes[0] += 1
        if nodes[0] > node_budget:
            raise _Budget
        # most constrained unit first: fewest unassigned neighbours
        root = min(rest, key=lambda u: (sum(1 for w in nb[u] if w in rest), rank[u]))
        for d in connected_sets(root, rest, nb, config.n_lo, config.n_hi, rng):
            left = rest - d
            if not remainder_feasible(left, m - 1, nb, config.n_lo, config.n_hi):
                continue
            tail = search(left, m - 1)
            if tail is not None:
                return [d] + tail
        return None

    if not remainder_feasible(set(range(region.n)), config.k, nb, config.n_lo, config.n_hi):
        return []
    try:
        found = search(set(range(region.n)), config.k)
    except _Budget:
        return None
    return found if found is not None else []


def initial_solution(config: InstanceConfig, seed: int = 0, node_budget: int = 20_000,
                     restarts: int = 50) -> Solution:
    """A feasible partition found by seeded backtracking with restarts.

    Raises ConstructionError when the search proves infeasibility or every
    restart exhausts its node budget.
    """
    for attempt in range(restarts):
        rng = np.random.default_rng([seed, attempt])
        found = _construct(config, rng, node_budget)
        if found == []:
            raise ConstructionError("no feasible partition exists for these bounds and k")
        if found is not None:
            # sources ordered by injected flow, smallest first
            found.sort(key=lambda d: (len(d), min(d)))
            sol = Solution.from_districts(found, config.region.n)
            sol.meta = {"construction_seed": seed, "restart": attempt}
            return sol
    raise ConstructionError(f"construction exhausted {restarts} restarts of {node_budget} nodes; "
                            "consider relaxing the size bounds")
