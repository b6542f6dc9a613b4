"""Shallow network estimator: 5 district features -> 3 ReLU units -> cost."""
from __future__ import annotations

from typing import Sequence

import numpy as np

from .. import autodiff as ad
from .base import CostOracle, OracleError, check_districts
from .features import FeatureContext
from .training import apply_standardize, fit

SNN_EPOCHS = 2000
SNN_LR = 1e-3


def snn_inputs(context: FeatureContext, districts) -> np.ndarray:
    """Rows of (R_d, l/h, Delta_d, (l/h) / R_d, sqrt(A_d R_d))."""
    rows = []
    for d in districts:
        f = context.features(d)
        ratio = f.ratio
        rows.append((f.requests, ratio, f.depot_request_distance, ratio / f.requests,
                     np.sqrt(f.area * f.requests)))
    return np.asarray(rows, dtype=float).reshape(-1, 5)


def snn_forward_np(params: dict[str, np.ndarray], x: np.ndarray) -> np.ndarray:
    hidden = np.maximum(x @ params["w1"].T + params["b1"], 0.0)
    return hidden @ params["w2"].T + params["b2"]


def snn_forward(params: dict[str, ad.Tensor], x: np.ndarray) -> ad.Tensor:
    hidden = ad.relu(ad.add(ad.matmul(x, params["w1t"]), params["b1"]))
    return ad.add(ad.matmul(hidden, params["w2t"]), params["b2"])


class SNNOracle(CostOracle):
    kind = "snn"

    def predict_many(self, districts):
        x = snn_inputs(self.context, check_districts(districts))
        z = apply_standardize(x, self.params["x_mean"], self.params["x_std"])
        y = snn_forward_np(self.params, z).ravel()
        return y * self.params["y_std"][0] + self.params["y_mean"][0]


def init_snn(seed: int) -> dict[str, np.ndarray]:
    rng = np.random.default_rng(seed)
    return {"w1": ad.glorot_uniform(rng, 3, 5), "b1": np.zeros(3),
            "w2": ad.glorot_uniform(rng, 1, 3), "b2": np.zeros(1)}


def train_snn(records: Sequence, context: FeatureContext, seed: int = 0, epochs: int = SNN_EPOCHS,
              lr: float = SNN_LR, patience: int | None = None) -> SNNOracle:
    """Full-batch Adam on mean-squared error, best validation weights kept."""
    if not records:
        raise OracleError("snn: empty dataset")
    x = snn_inputs(context, [r.members for r in records])
    y = np.array([r.cost for r in records])
    roles = np.array([r.role for r in records])
    train_idx = np.flatnonzero(roles == "train")
    val_idx = np.flatnonzero(roles == "val")
    if len(train_idx) == 0:
        raise OracleError("snn: no training records")
    x_mean, x_std = x[train_idx].mean(axis=0), x[train_idx].std(axis=0)
    y_mean, y_std = float(y[train_idx].mean()), float(y[train_idx].std()) or 1.0
    z = apply_standardize(x, x_mean, x_std)
    target = (y - y_mean) / y_std
    init = init_snn(seed)
    tape = {"w1t": ad.parameter(init["w1"].T), "b1": ad.parameter(init["b1"]),
            "w2t": ad.parameter(init["w2"].T), "b2": ad.parameter(init["b2"])}

    def current():
        return {"w1": tape["w1t"].data.T, "b1": tape["b1"].data, "w2": tape["w2t"].data.T, "b2": tape["b2"].data}

    log = fit(tape, lambda idx: snn_forward(tape, z[idx]),
              lambda idx: snn_forward_np(current(), z[idx]), target, train_idx, val_idx,
              loss="mse", lr=lr, epochs=epochs, batch_size=None,
              patience=patience if patience is not None else epochs, seed=seed)
    params = {k: v.copy() for k, v in current().items()}
    params.update(x_mean=x_mean, x_std=x_std, y_mean=np.array([y_mean]), y_std=np.array([y_std]))
    meta = {"seed": seed, "epochs": epochs, "lr": lr, "epochs_run": log.epochs_run,
            "best_epoch": log.best_epoch, "best_val_loss": log.best_loss,
            "init": "glorot_uniform", "loss": "mse"}
    return SNNOracle(context, params, meta)
