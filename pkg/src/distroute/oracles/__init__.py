"""District cost estimators behind one interface: ``predict`` / ``predict_many``."""
from __future__ import annotations

import json
from pathlib import Path
from typing import Sequence

import numpy as np

from ..region import RegionModel
from .base import CostOracle, LookupOracle, OracleError, SAAOracle
from .features import DistrictFeatures, FeatureContext, compute_features
from .formulas import BHHDOracle, FIGOracle, fit_bhhd, fit_fig
from .gnn import GNNConfig, GNNOracle, train_gnn
from .snn import SNNOracle, train_snn

KINDS = ("bhhd", "fig", "snn", "gnn")
_CLASSES = {"bhhd": BHHDOracle, "fig": FIGOracle, "snn": SNNOracle, "gnn": GNNOracle}


def train_oracle(kind: str, records: Sequence, context: FeatureContext, seed: int = 0,
                 gnn_config: GNNConfig | None = None, snn_epochs: int | None = None) -> CostOracle:
    """Calibrate/train one estimator. Formulas use train+val records, networks hold val out."""
    if kind == "bhhd":
        return fit_bhhd([r for r in records if r.role in ("train", "val")], context)
    if kind == "fig":
        return fit_fig([r for r in records if r.role in ("train", "val")], context)
    if kind == "snn":
        return train_snn(records, context, seed=seed, **({"epochs": snn_epochs} if snn_epochs else {}))
    if kind == "gnn":
        return train_gnn(records, context, seed=seed, config=gnn_config)
    raise OracleError(f"unknown oracle kind {kind!r}; expected one of {KINDS}")


def evaluate_rmse(oracle: CostOracle, records: Sequence) -> float:
    if not records:
        raise OracleError("no evaluation districts")
    pred = oracle.predict_many([r.members for r in records])
    label = np.array([r.cost for r in records])
    return float(np.sqrt(np.mean((pred - label) ** 2)))


def oracle_from_dict(doc: dict, region: RegionModel) -> CostOracle:
    kind = doc.get("kind")
    if kind not in _CLASSES:
        raise OracleError(f"unknown oracle kind {kind!r}")
    context = FeatureContext.from_dict(region, doc["context"])
    return _CLASSES[kind](context, CostOracle.decode_params(doc), doc.get("meta", {}))


def save_model(oracle: CostOracle, path, provenance: dict | None = None) -> None:
    doc = oracle.to_dict()
    if provenance:
        doc["provenance"] = provenance
    Path(path).write_text(json.dumps(doc, sort_keys=True) + "\n")


def load_model(path, region: RegionModel) -> CostOracle:
    return oracle_from_dict(json.loads(Path(path).read_text()), region)


__all__ = [
    "KINDS", "CostOracle", "LookupOracle", "SAAOracle", "OracleError", "DistrictFeatures",
    "FeatureContext", "compute_features", "BHHDOracle", "FIGOracle", "SNNOracle", "GNNOracle",
    "GNNConfig", "fit_bhhd", "fit_fig", "train_snn", "train_gnn", "train_oracle",
    "evaluate_rmse", "save_model", "load_model", "oracle_from_dict",
]
