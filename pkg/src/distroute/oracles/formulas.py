"""Continuous-approximation estimators: Beardwood-Halton-Hammersley with the
Daganzo line-haul term (BHHD), and Figliozzi's four-coefficient variant (FIG)."""
from __future__ import annotations

from typing import Sequence

import numpy as np

from .base import CostOracle, OracleError, check_districts
from .features import FeatureContext

RIDGE = 1e-8


def _aggregates(context: FeatureContext, districts) -> np.ndarray:
    """(m, 3) rows of (A_d, R_d, Delta_d)."""
    rows = []
    for d in districts:
        f = context.features(d)
        rows.append((f.area, f.requests, f.depot_request_distance))
    return np.asarray(rows, dtype=float).reshape(-1, 3)


def fig_design(agg: np.ndarray) -> np.ndarray:
    a, r, delta = agg[:, 0], agg[:, 1], agg[:, 2]
    return np.column_stack([np.sqrt(a * r), delta, np.sqrt(a / r), np.ones(len(agg))])


class BHHDOracle(CostOracle):
    kind = "bhhd"

    def predict_many(self, districts):
        agg = _aggregates(self.context, check_districts(districts))
        beta = float(self.params["beta"].ravel()[0])
        return beta * np.sqrt(agg[:, 0] * agg[:, 1]) + 2.0 * agg[:, 2]


class FIGOracle(CostOracle):
    kind = "fig"

    def predict_many(self, districts):
        agg = _aggregates(self.context, check_districts(districts))
        return fig_design(agg) @ self.params["beta"].ravel()


def fit_bhhd_arrays(area, requests, delta, cost) -> float:
    """Closed-form least squares for beta in  beta*sqrt(A R) + 2 Delta ~ cost."""
    x = np.sqrt(np.asarray(area) * np.asarray(requests))
    y = np.asarray(cost) - 2.0 * np.asarray(delta)
    sxx = float(x @ x)
    if sxx == 0.0:
        raise OracleError("bhhd: every regressor sqrt(A R) is zero")
    return float(x @ y) / sxx


def fit_fig_arrays(area, requests, delta, cost) -> np.ndarray:
    """Ordinary least squares on (sqrt(A R), Delta, sqrt(A / R), 1) via normal equations.

    Falls back to a ridge term of 1e-8 when the design is rank deficient.
    """
    X = fig_design(np.column_stack([area, requests, delta]))
    y = np.asarray(cost, dtype=float)
    if len(y) == 0:
        raise OracleError("fig: no records")
    gram = X.T @ X
    rhs = X.T @ y
    if np.linalg.matrix_rank(X) == X.shape[1]:
        return np.linalg.solve(gram, rhs)
    regularised = gram + RIDGE * np.eye(4)
    if np.linalg.matrix_rank(regularised) < 4 or not np.all(np.isfinite(regularised)):
        raise OracleError("fig: degenerate design matrix")
    return np.linalg.solve(regularised, rhs)


def _fit_inputs(records, context: FeatureContext):
    if not records:
        raise OracleError("no labelled records to calibrate on")
    agg = _aggregates(context, [r.members for r in records])
    cost = np.array([r.cost for r in records])
    return agg[:, 0], agg[:, 1], agg[:, 2], cost


def fit_bhhd(records: Sequence, context: FeatureContext) -> BHHDOracle:
    beta = fit_bhhd_arrays(*_fit_inputs(records, context))
    return BHHDOracle(context, {"beta": np.array([beta])}, {"records": len(records)})


def fit_fig(records: Sequence, context: FeatureContext) -> FIGOracle:
    beta = fit_fig_arrays(*_fit_inputs(records, context))
    return FIGOracle(context, {"beta": beta}, {"records": len(records)})
