"""District features shared by the cost estimators."""
from __future__ import annotations

from dataclasses import dataclass
from typing import Iterable

import numpy as np

from .. import geometry as geo
from ..region import RegionModel
from ..scenario import ScenarioSet

UNIT_FEATURES = ("population", "sqrt_population", "perimeter", "area", "sqrt_area",
                 "density", "depot_distance", "included")


class FeatureError(ValueError):
    pass


@dataclass(frozen=True)
class DistrictFeatures:
    unit_features: np.ndarray  # (n, 8); last column is the membership flag
    area: float                # total area A_d
    requests: float            # expected request count R_d
    depot_request_distance: float  # mean depot-to-request distance Delta_d
    length: float              # minimum-area covering rectangle, long side
    height: float              # ... short side

    @property
    def ratio(self) -> float:
        return self.length / self.height


def static_unit_features(region: RegionModel) -> np.ndarray:
    """(n, 7) matrix of the membership-independent unit features."""
    pop = region.populations
    area = region.areas
    return np.column_stack([pop, np.sqrt(pop), region.perimeters, area, np.sqrt(area),
                            pop / area, region.depot_distances])


class FeatureContext:
    """Per-unit statistics needed to compute district features quickly.

    Depot-to-request distances are kept per unit and scenario as sums and
    counts, so a district's mean over scenarios costs O(|d| * S).
    """

    def __init__(self, region: RegionModel, kappa: float, dist_sums: np.ndarray, counts: np.ndarray):
        if dist_sums.shape != counts.shape or dist_sums.shape[0] != region.n:
            raise FeatureError("per-unit scenario statistics do not match the region")
        self.region = region
        self.kappa = float(kappa)
        self.dist_sums = np.asarray(dist_sums, dtype=float)
        self.counts = np.asarray(counts, dtype=float)
        self.static = static_unit_features(region)
        self._rings = region.rings
        self._cache: dict[frozenset, DistrictFeatures] = {}

    @classmethod
    def from_scenarios(cls, region: RegionModel, scenarios: ScenarioSet) -> "FeatureContext":
        if scenarios.split != "train":
            raise FeatureError("features must be computed from Train scenarios")
        if scenarios.n_units != region.n:
            raise FeatureError("scenario set does not match the region")
        depot = np.asarray(region.depot)
        sums = np.zeros((region.n, scenarios.count))
        counts = np.zeros((region.n, scenarios.count))
        for u, scen in enumerate(scenarios.per_unit):
            for t, pts in enumerate(scen):
                if len(pts):
                    sums[u, t] = np.linalg.norm(pts - depot, axis=1).sum()
                    counts[u, t] = len(pts)
        return cls(region, scenarios.kappa, sums, counts)

    def to_dict(self) -> dict:
        return {"kappa": self.kappa, "region": self.region.fingerprint(),
                "dist_sums": self.dist_sums.tolist(), "counts": self.counts.astype(int).tolist()}

    @classmethod
    def from_dict(cls, region: RegionModel, doc: dict) -> "FeatureContext":
        if doc.get("region") and doc["region"] != region.fingerprint():
            raise FeatureError("model was built for a different region or depot")
        return cls(region, doc["kappa"], np.asarray(doc["dist_sums"], dtype=float),
                   np.asarray(doc["counts"], dtype=float))

    def depot_request_distance(self, members: list[int]) -> float:
        s = self.dist_sums[members].sum(axis=0)
        c = self.counts[members].sum(axis=0)
        nonempty = c > 0
        if nonempty.any():
            return float((s[nonempty] / c[nonempty]).mean())
        # no sampled request at all: fall back to the nearest unit distance
        return float(self.region.depot_distances[members].min())

    def features(self, district: Iterable[int]) -> DistrictFeatures:
        key = frozenset(district)
        hit = self._cache.get(key)
        if hit is not None:
            return hit
        if not key:
            raise FeatureError("empty district")
        members = sorted(key)
        if members[0] < 0 or members[-1] >= self.region.n:
            raise FeatureError(f"unknown unit in district {members}")
        incl = np.zeros(self.region.n)
        incl[members] = 1.0
        area = float(self.region.areas[members].sum())
        requests = self.kappa * float(self.region.populations[members].sum())
        length, height = geo.min_area_rectangle(np.vstack([self._rings[u] for u in members]))
        feat = DistrictFeatures(np.column_stack([self.static, incl]), area, requests,
                                self.depot_request_distance(members), length, height)
        if len(self._cache) < 500_000:
            self._cache[key] = feat
        return feat


def compute_features(region: RegionModel, district: Iterable[int], scenarios_train: ScenarioSet,
                     kappa: float | None = None) -> DistrictFeatures:
    if scenarios_train is None:
        raise FeatureError("Train scenarios are required")
    ctx = FeatureContext.from_scenarios(region, scenarios_train)
    if kappa is not None:
        ctx.kappa = float(kappa)
    return ctx.features(district)
