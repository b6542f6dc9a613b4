"""Region model: basic units, contiguity graph, depot, and region files."""
from __future__ import annotations

import hashlib
import json
import math
from collections import deque
from dataclasses import dataclass, field
from functools import cached_property
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

from . import geometry as geo

District = frozenset  # frozenset[int] of unit ids


class RegionError(ValueError):
    """Raised for malformed or invalid region data."""


@dataclass(frozen=True)
class BasicUnit:
    id: int
    boundary: tuple[tuple[float, float], ...]
    population: float
    area: float
    perimeter: float
    depot_distance: float

    @property
    def density(self) -> float:
        return self.population / self.area

    def monte_carlo_area(self, samples: int = 50_000, seed: int = 0) -> float:
        return geo.monte_carlo_area(self.boundary, samples, seed)


def make_unit(uid: int, polygon, population: float, depot) -> BasicUnit:
    ring = geo.as_ring(polygon)
    if not geo.is_simple(ring):
        raise RegionError(f"unit {uid}: polygon is not simple")
    if not population > 0:
        raise RegionError(f"unit {uid}: population must be positive, got {population}")
    return BasicUnit(
        id=uid,
        boundary=tuple((float(x), float(y)) for x, y in ring),
        population=float(population),
        area=geo.shoelace_area(ring),
        perimeter=geo.perimeter(ring),
        depot_distance=geo.point_polygon_distance(depot, ring),
    )


@dataclass(frozen=True)
class RegionModel:
    units: tuple[BasicUnit, ...]
    edges: frozenset  # of (i, j) with i < j
    depot: tuple[float, float]
    name: str = field(default="region", compare=False)

    def __post_init__(self):
        n = len(self.units)
        for k, u in enumerate(self.units):
            if u.id != k:
                raise RegionError(f"unit ids must be 0..n-1 in order; position {k} holds id {u.id}")
        for i, j in self.edges:
            if i == j:
                raise RegionError(f"self-loop on unit {i}")
            if not (0 <= i < j < n):
                raise RegionError(f"edge ({i}, {j}) out of range or not normalized")
        if n == 0:
            raise RegionError("region has no units")
        if not is_connected(range(n), self.neighbors):
            raise RegionError("region contiguity graph is disconnected")

    @property
    def n(self) -> int:
        return len(self.units)

    @cached_property
    def neighbors(self) -> tuple[tuple[int, ...], ...]:
        nb: list[list[int]] = [[] for _ in self.units]
        for i, j in sorted(self.edges):
            nb[i].append(j)
            nb[j].append(i)
        return tuple(tuple(sorted(x)) for x in nb)

    @cached_property
    def adjacency_matrix(self) -> np.ndarray:
        a = np.zeros((self.n, self.n))
        for i, j in self.edges:
            a[i, j] = a[j, i] = 1.0
        return a

    @cached_property
    def areas(self) -> np.ndarray:
        return np.array([u.area for u in self.units])

    @cached_property
    def populations(self) -> np.ndarray:
        return np.array([u.population for u in self.units])

    @cached_property
    def perimeters(self) -> np.ndarray:
        return np.array([u.perimeter for u in self.units])

    @cached_property
    def depot_distances(self) -> np.ndarray:
        return np.array([u.depot_distance for u in self.units])

    @cached_property
    def rings(self) -> tuple[np.ndarray, ...]:
        return tuple(np.asarray(u.boundary) for u in self.units)

    @cached_property
    def bbox(self) -> tuple[float, float, float, float]:
        allv = np.vstack(self.rings)
        return float(allv[:, 0].min()), float(allv[:, 1].min()), float(allv[:, 0].max()), float(allv[:, 1].max())

    @cached_property
    def centroid(self) -> tuple[float, float]:
        cs = np.array([geo.centroid(r) for r in self.rings])
        w = self.areas / self.areas.sum()
        return float(w @ cs[:, 0]), float(w @ cs[:, 1])

    def with_depot(self, depot) -> "RegionModel":
        depot = (float(depot[0]), float(depot[1]))
        units = tuple(make_unit(u.id, u.boundary, u.population, depot) for u in self.units)
        return RegionModel(units, self.edges, depot, self.name)

    def is_connected(self, members: Iterable[int]) -> bool:
        return is_connected(members, self.neighbors)

    def monte_carlo_areas(self, samples: int = 50_000, seed: int = 0) -> np.ndarray:
        return np.array([u.monte_carlo_area(samples, seed + u.id) for u in self.units])

    def to_dict(self) -> dict:
        return {
            "units": [
                {"id": u.id, "polygon": [list(p) for p in u.boundary], "population": u.population}
                for u in self.units
            ],
            "adjacency": [list(e) for e in sorted(self.edges)],
            "depot": list(self.depot),
        }

    def fingerprint(self) -> str:
        blob = json.dumps(self.to_dict(), sort_keys=True, separators=(",", ":"))
        return hashlib.sha256(blob.encode()).hexdigest()[:16]


def is_connected(members: Iterable[int], neighbors: Sequence[Sequence[int]]) -> bool:
    """Breadth-first check that ``members`` induce a connected subgraph."""
    members = set(members)
    if not members:
        return False
    start = next(iter(members))
    seen = {start}
    queue = deque([start])
    while queue:
        v = queue.popleft()
        for w in neighbors[v]:
            if w in members and w not in seen:
                seen.add(w)
                queue.append(w)
    return len(seen) == len(members)


def components(members: Iterable[int], neighbors: Sequence[Sequence[int]]) -> list[set[int]]:
    left = set(members)
    out = []
    while left:
        start = min(left)
        comp = {start}
        queue = deque([start])
        while queue:
            v = queue.popleft()
            for w in neighbors[v]:
                if w in left and w not in comp:
                    comp.add(w)
                    queue.append(w)
        left -= comp
        out.append(comp)
    return out


# -- adjacency derivation ------------------------------------------------------

def _shares_segment(a: np.ndarray, b: np.ndarray, tol: float) -> bool:
    a2 = np.roll(a, -1, axis=0)
    b2 = np.roll(b, -1, axis=0)
    for p, q in zip(a, a2):
        d = q - p
        length = math.hypot(*d)
        if length <= tol:
            continue
        u = d / length
        # perpendicular offsets of the other ring's edge endpoints
        off1 = (b - p) @ np.array([-u[1], u[0]])
        off2 = (b2 - p) @ np.array([-u[1], u[0]])
        on_line = (np.abs(off1) <= tol) & (np.abs(off2) <= tol)
        if not on_line.any():
            continue
        s1 = (b[on_line] - p) @ u
        s2 = (b2[on_line] - p) @ u
        lo = np.maximum(np.minimum(s1, s2), 0.0)
        hi = np.minimum(np.maximum(s1, s2), length)
        if np.any(hi - lo > tol):
            return True
    return False


def derive_adjacency(rings: Sequence[np.ndarray], tol: float = 1e-7) -> frozenset:
    """Rook contiguity: units are adjacent when their boundaries share a segment."""
    boxes = [(r[:, 0].min(), r[:, 1].min(), r[:, 0].max(), r[:, 1].max()) for r in rings]
    edges = set()
    for i in range(len(rings)):
        for j in range(i + 1, len(rings)):
            bi, bj = boxes[i], boxes[j]
            if bi[2] + tol < bj[0] or bj[2] + tol < bi[0] or bi[3] + tol < bj[1] or bj[3] + tol < bi[1]:
                continue
            if _shares_segment(rings[i], rings[j], tol):
                edges.add((i, j))
    return frozenset(edges)


# -- region files --------------------------------------------------------------

def region_from_dict(doc: dict, name: str = "region") -> RegionModel:
    if not isinstance(doc, dict):
        raise RegionError("region document must be a JSON object")
    for key in ("units", "depot"):
        if key not in doc:
            raise RegionError(f"missing field '{key}'")
    depot = doc["depot"]
    if not (isinstance(depot, (list, tuple)) and len(depot) == 2):
        raise RegionError("field 'depot': expected [x, y]")
    raw = doc["units"]
    if not isinstance(raw, list) or not raw:
        raise RegionError("field 'units': expected a nonempty list")
    by_id = {}
    for pos, u in enumerate(raw):
        for key in ("id", "polygon", "population"):
            if key not in u:
                raise RegionError(f"units[{pos}]: missing field '{key}'")
        uid = u["id"]
        if not isinstance(uid, int) or uid in by_id:
            raise RegionError(f"units[{pos}]: bad or duplicate id {uid!r}")
        by_id[uid] = u
    if sorted(by_id) != list(range(len(by_id))):
        raise RegionError("unit ids must be exactly 0..n-1")
    units = []
    for uid in range(len(by_id)):
        u = by_id[uid]
        try:
            units.append(make_unit(uid, u["polygon"], float(u["population"]), depot))
        except geo.GeometryError as exc:
            raise RegionError(f"unit {uid}: {exc}") from None
    if doc.get("adjacency") is not None:
        edges = set()
        for pos, e in enumerate(doc["adjacency"]):
            if len(e) != 2:
                raise RegionError(f"adjacency[{pos}]: expected [i, j]")
            i, j = int(e[0]), int(e[1])
            if i == j:
                raise RegionError(f"adjacency[{pos}]: self-loop on {i}")
            edges.add((min(i, j), max(i, j)))
        edges = frozenset(edges)
    else:
        edges = derive_adjacency([np.asarray(u.boundary) for u in units])
    return RegionModel(tuple(units), edges, (float(depot[0]), float(depot[1])), name)


def load_region(path) -> RegionModel:
    path = Path(path)
    try:
        doc = json.loads(path.read_text())
    except json.JSONDecodeError as exc:
        raise RegionError(f"{path}: line {exc.lineno}: {exc.msg}") from None
    return region_from_dict(doc, name=path.stem)


def save_region(region: RegionModel, path, provenance: dict | None = None) -> None:
    doc = region.to_dict()
    if provenance:
        doc["provenance"] = provenance
    Path(path).write_text(json.dumps(doc, sort_keys=True) + "\n")


# -- generators ----------------------------------------------------------------

def _population(rng: np.random.Generator, n: int) -> np.ndarray:
    pop = rng.normal(8000.0, 1600.0, n)
    return np.round(np.clip(pop, 5000.0, 16000.0), 1)


def grid_region(width: int, height: int, cell: float = 1.0, seed: int | None = 0,
                population: float | None = None) -> RegionModel:
    """Width x height grid of square cells, row-major ids, depot at the centre."""
    if width < 1 or height < 1:
        raise RegionError("grid dimensions must be positive")
    n = width * height
    pops = np.full(n, float(population)) if population else _population(np.random.default_rng(seed), n)
    depot = (width * cell / 2.0, height * cell / 2.0)
    units = []
    edges = set()
    for r in range(height):
        for c in range(width):
            uid = r * width + c
            x0, y0 = c * cell, r * cell
            poly = [(x0, y0), (x0 + cell, y0), (x0 + cell, y0 + cell), (x0, y0 + cell)]
            units.append(make_unit(uid, poly, pops[uid], depot))
            if c + 1 < width:
                edges.add((uid, uid + 1))
            if r + 1 < height:
                edges.add((uid, uid + width))
    return RegionModel(tuple(units), frozenset(edges), depot, f"grid{width}x{height}")


def _voronoi_cells(seeds: np.ndarray, side: float) -> list[np.ndarray]:
    from scipy.spatial import Voronoi

    mirrored = [seeds]
    for axis, bound in ((0, 0.0), (0, side), (1, 0.0), (1, side)):
        m = seeds.copy()
        m[:, axis] = 2 * bound - m[:, axis]
        mirrored.append(m)
    vor = Voronoi(np.vstack(mirrored))
    cells = []
    for i in range(len(seeds)):
        region = vor.regions[vor.point_region[i]]
        ring = np.round(vor.vertices[region], 6)
        ring = np.clip(ring, 0.0, side)
        keep = [k for k in range(len(ring)) if not np.array_equal(ring[k], ring[k - 1])]
        ring = ring[keep]
        if _signed_area(ring) < 0:
            ring = ring[::-1]
        cells.append(ring)
    return cells


def _signed_area(ring: np.ndarray) -> float:
    x, y = ring[:, 0], ring[:, 1]
    return 0.5 * float(np.dot(x, np.roll(y, -1)) - np.dot(y, np.roll(x, -1)))


def synthetic_city(n: int, seed: int = 0, mean_area: float = 2.0) -> RegionModel:
    """Voronoi-like irregular units, small and dense near the centre.

    Seeds are placed by dart throwing with a spacing that grows with the
    distance to the centre, so cells (and thus population density, since
    populations are drawn around 8000) shrink toward the middle.
    """
    if n < 2:
        raise RegionError("synthetic city needs at least 2 units")
    rng = np.random.default_rng(seed)
    side = math.sqrt(n * mean_area)
    centre = np.array([side / 2.0, side / 2.0])
    spacing = 0.9 * side / math.sqrt(n)
    while True:
        pts = np.empty((0, 2))
        attempts = 0
        while len(pts) < n and attempts < 400 * n:
            attempts += 1
            p = rng.uniform(0.0, side, 2)
            r = np.linalg.norm(p - centre) / (side / 2.0)
            need = spacing * (0.3 + 1.0 * min(r, 1.3))
            if len(pts) == 0 or np.min(np.hypot(*(pts - p).T)) >= need:
                pts = np.vstack([pts, p])
        if len(pts) == n:
            break
        spacing *= 0.95
    order = np.lexsort((pts[:, 0], -pts[:, 1]))
    pts = pts[order]
    cells = _voronoi_cells(pts, side)
    pops = _population(rng, n)
    depot = (side / 2.0, side / 2.0)
    units = tuple(make_unit(i, cells[i], pops[i], depot) for i in range(n))
    edges = derive_adjacency([np.asarray(u.boundary) for u in units])
    return RegionModel(units, edges, depot, f"city{n}")
