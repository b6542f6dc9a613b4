from __future__ import annotations

from typing import Iterable, Sequence

import numpy as np

from .features import FeatureContext


class OracleError(ValueError):
    pass


class CostOracle:
    """District cost estimator bound to one region/instance feature context."""

    kind = "base"

    def __init__(self, context: FeatureContext | None, params: dict[str, np.ndarray], meta: dict | None = None):
        self.context = context
        self.params = {k: np.asarray(v, dtype=float) for k, v in params.items()}
        self.meta = dict(meta or {})
        for name, value in self.params.items():
            if not np.all(np.isfinite(value)):
                raise OracleError(f"{self.kind}: parameter {name} is not finite")

    def predict(self, district: Iterable[int]) -> float:
        return float(self.predict_many([frozenset(district)])[0])

    def predict_many(self, districts: Sequence[Iterable[int]]) -> np.ndarray:
        raise NotImplementedError

    def to_dict(self) -> dict:
        return {
            "kind": self.kind,
            "params": {k: {"shape": list(v.shape), "values": v.ravel().tolist()} for k, v in self.params.items()},
            "meta": self.meta,
            "context": self.context.to_dict() if self.context is not None else None,
        }

    @staticmethod
    def decode_params(doc: dict) -> dict[str, np.ndarray]:
        return {k: np.asarray(v["values"], dtype=float).reshape(v["shape"]) for k, v in doc["params"].items()}


def check_districts(districts) -> list[frozenset]:
    out = [frozenset(d) for d in districts]
    for d in out:
        if not d:
            raise OracleError("cannot price an empty district")
    return out


class LookupOracle(CostOracle):
    """Costs from a precomputed table, falling back to a callable on misses."""

    kind = "lookup"

    def __init__(self, table: dict[frozenset, float] | None = None, fallback=None):
        super().__init__(None, {})
        self.table = dict(table or {})
        self.fallback = fallback

    def predict_many(self, districts):
        out = []
        for d in check_districts(districts):
            c = self.table.get(d)
            if c is None:
                if self.fallback is None:
                    raise OracleError(f"no cost for district {sorted(d)}")
                c = float(self.fallback(d))
                self.table[d] = c
            out.append(c)
        return np.asarray(out, dtype=float)


class SAAOracle(LookupOracle):
    """Exact SAA pricing on a scenario set, memoised per member set."""

    kind = "saa"

    def __init__(self, region, scenarios, table=None):
        from ..saa import saa_district_cost

        super().__init__(table, lambda d: saa_district_cost(region, d, scenarios))
        self.meta = {"split": scenarios.split, "scenario_seed": scenarios.seed, "count": scenarios.count}
