"""structure2vec-style graph network estimator.

Node embeddings are refined for ``rounds`` steps over the full region graph
(members and non-members alike; membership is the last input feature),
passed through one more neighbour aggregation, sum-pooled, and read out by a
two-layer dense head. Stored weights use (out, in) orientation.
"""
from __future__ import annotations

from dataclasses import asdict, dataclass
from typing import Sequence

import numpy as np

from .. import autodiff as ad
from .base import CostOracle, OracleError, check_districts
from .features import FeatureContext
from .training import apply_standardize, fit


@dataclass(frozen=True)
class GNNConfig:
    hidden: int = 16      # node embedding width
    readout: int = 64     # output embedding / pooling width
    head: int = 32        # dense head hidden width
    rounds: int = 4
    lr: float = 1e-3      # desk scale; the full preset uses 1e-4
    epochs: int = 1500
    batch_size: int = 64
    patience: int = 1000

    @classmethod
    def full(cls, **overrides) -> "GNNConfig":
        base = dict(hidden=64, readout=1024, head=100, epochs=10_000, lr=1e-4)
        base.update(overrides)
        return cls(**base)


def init_gnn(cfg: GNNConfig, seed: int, n_features: int = 8) -> dict[str, np.ndarray]:
    rng = np.random.default_rng(seed)
    p, k, h = cfg.hidden, cfg.readout, cfg.head
    return {
        "theta1": ad.glorot_uniform(rng, p, n_features),
        "theta2": ad.glorot_uniform(rng, p, p),
        "theta3": ad.glorot_uniform(rng, k, p),
        "theta4": ad.glorot_uniform(rng, k, k),
        "theta5": ad.glorot_uniform(rng, k, k),
        "theta6": ad.glorot_uniform(rng, h, k),
        "b6": np.zeros(h),
        "theta7": ad.glorot_uniform(rng, 1, h),
        "b7": np.zeros(1),
    }


def gnn_forward_np(params: dict[str, np.ndarray], static: np.ndarray, adj: np.ndarray,
                   incl: np.ndarray, rounds: int) -> np.ndarray:
    """Raw network output for a batch of membership vectors ``incl`` (B, n)."""
    t1 = params["theta1"]
    base = (static @ t1[:, :-1].T)[None, :, :] + incl[:, :, None] * t1[:, -1][None, None, :]
    mu = np.maximum(base, 0.0)
    for _ in range(rounds - 1):
        mu = np.maximum(base + np.matmul(adj, mu) @ params["theta2"].T, 0.0)
    out = np.maximum(np.matmul(adj, mu) @ params["theta3"].T, 0.0)
    pooled = out.sum(axis=1)
    z = np.maximum(pooled @ params["theta5"].T, 0.0) @ params["theta4"].T
    hidden = np.maximum(z @ params["theta6"].T + params["b6"], 0.0)
    return (hidden @ params["theta7"].T + params["b7"]).ravel()


def gnn_forward(tape: dict[str, ad.Tensor], static: np.ndarray, adj: np.ndarray,
                incl: np.ndarray, rounds: int) -> ad.Tensor:
    """Differentiable twin of :func:`gnn_forward_np` over transposed weights."""
    base = ad.add(ad.matmul(static, tape["w1s"]), ad.mul(incl[:, :, None], tape["w1e"]))
    mu = ad.relu(base)
    for _ in range(rounds - 1):
        mu = ad.relu(ad.add(base, ad.matmul(ad.matmul(adj, mu), tape["w2"])))
    out = ad.relu(ad.matmul(ad.matmul(adj, mu), tape["w3"]))
    pooled = ad.sum(out, axis=1)
    z = ad.matmul(ad.relu(ad.matmul(pooled, tape["w5"])), tape["w4"])
    hidden = ad.relu(ad.add(ad.matmul(z, tape["w6"]), tape["b6"]))
    return ad.add(ad.matmul(hidden, tape["w7"]), tape["b7"])


def to_tape(params: dict[str, np.ndarray]) -> dict[str, ad.Tensor]:
    t1 = params["theta1"]
    return {
        "w1s": ad.parameter(t1[:, :-1].T), "w1e": ad.parameter(t1[:, -1][None, :]),
        "w2": ad.parameter(params["theta2"].T), "w3": ad.parameter(params["theta3"].T),
        "w4": ad.parameter(params["theta4"].T), "w5": ad.parameter(params["theta5"].T),
        "w6": ad.parameter(params["theta6"].T), "b6": ad.parameter(params["b6"]),
        "w7": ad.parameter(params["theta7"].T), "b7": ad.parameter(params["b7"]),
    }


def from_tape(tape: dict[str, ad.Tensor]) -> dict[str, np.ndarray]:
    return {
        "theta1": np.hstack([tape["w1s"].data.T, tape["w1e"].data.T]),
        "theta2": tape["w2"].data.T.copy(), "theta3": tape["w3"].data.T.copy(),
        "theta4": tape["w4"].data.T.copy(), "theta5": tape["w5"].data.T.copy(),
        "theta6": tape["w6"].data.T.copy(), "b6": tape["b6"].data.copy(),
        "theta7": tape["w7"].data.T.copy(), "b7": tape["b7"].data.copy(),
    }


def membership(n: int, districts: Sequence) -> np.ndarray:
    incl = np.zeros((len(districts), n))
    for row, d in enumerate(districts):
        incl[row, list(d)] = 1.0
    return incl


class GNNOracle(CostOracle):
    kind = "gnn"

    def __init__(self, context, params, meta=None):
        super().__init__(context, params, meta)
        self.rounds = int(self.meta.get("config", {}).get("rounds", 4))
        if context is not None:
            self._static = apply_standardize(context.static, self.params["f_mean"], self.params["f_std"])
            self._adj = context.region.adjacency_matrix

    @property
    def weights(self) -> dict[str, np.ndarray]:
        return {k: v for k, v in self.params.items() if k.startswith(("theta", "b"))}

    def predict_many(self, districts):
        districts = check_districts(districts)
        n = self.context.region.n
        for d in districts:
            if max(d) >= n or min(d) < 0:
                raise OracleError(f"unknown unit in district {sorted(d)}")
        raw = gnn_forward_np(self.params, self._static, self._adj, membership(n, districts), self.rounds)
        return raw * self.params["y_std"][0] + self.params["y_mean"][0]


def train_gnn(records: Sequence, context: FeatureContext, seed: int = 0,
              config: GNNConfig | None = None) -> GNNOracle:
    """Adam on mean absolute error over minibatches; best validation weights kept."""
    cfg = config or GNNConfig()
    if not records:
        raise OracleError("gnn: empty dataset")
    region = context.region
    f_mean, f_std = context.static.mean(axis=0), context.static.std(axis=0)
    static = apply_standardize(context.static, f_mean, f_std)
    adj = region.adjacency_matrix
    incl = membership(region.n, [r.members for r in records])
    y = np.array([r.cost for r in records])
    roles = np.array([r.role for r in records])
    train_idx = np.flatnonzero(roles == "train")
    val_idx = np.flatnonzero(roles == "val")
    if len(train_idx) == 0:
        raise OracleError("gnn: no training records")
    y_mean, y_std = float(y[train_idx].mean()), float(y[train_idx].std()) or 1.0
    target = (y - y_mean) / y_std
    tape = to_tape(init_gnn(cfg, seed))

    def predict(idx):
        return gnn_forward_np(from_tape(tape), static, adj, incl[idx], cfg.rounds)

    log = fit(tape, lambda idx: gnn_forward(tape, static, adj, incl[idx], cfg.rounds), predict,
              target, train_idx, val_idx, loss="l1", lr=cfg.lr, epochs=cfg.epochs,
              batch_size=cfg.batch_size, patience=cfg.patience, seed=seed)
    params = from_tape(tape)
    params.update(f_mean=f_mean, f_std=f_std, y_mean=np.array([y_mean]), y_std=np.array([y_std]))
    meta = {"seed": seed, "config": asdict(cfg), "epochs_run": log.epochs_run,
            "best_epoch": log.best_epoch, "best_val_loss": log.best_loss,
            "init": "glorot_uniform", "loss": "l1", "mu0": "zeros"}
    return GNNOracle(context, params, meta)
