"""Shared minibatch training loop for the neural estimators."""
from __future__ import annotations

import logging
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from .. import autodiff as ad

log = logging.getLogger(__name__)

STD_EPS = 1e-12


class TrainingError(RuntimeError):
    pass


@dataclass
class TrainLog:
    epochs_run: int = 0
    best_epoch: int = -1
    best_loss: float = float("inf")
    best_history: list = field(default_factory=list)  # (epoch, best-so-far validation loss)


def standardize(x: np.ndarray, axis: int = 0) -> tuple[np.ndarray, np.ndarray]:
    mean = x.mean(axis=axis)
    std = x.std(axis=axis)
    return mean, std


def apply_standardize(x, mean, std):
    return (x - mean) / np.maximum(std, STD_EPS)


def loss_tensor(pred: ad.Tensor, target: np.ndarray, kind: str) -> ad.Tensor:
    diff = ad.sub(pred, target.reshape(pred.shape))
    if kind == "l1":
        return ad.mean(ad.absolute(diff))
    if kind == "mse":
        return ad.mean(ad.square(diff))
    raise ValueError(f"unknown loss {kind!r}")


def loss_value(pred: np.ndarray, target: np.ndarray, kind: str) -> float:
    diff = pred.ravel() - target.ravel()
    return float(np.abs(diff).mean() if kind == "l1" else (diff ** 2).mean())


def fit(params: dict[str, ad.Tensor], forward: Callable[[np.ndarray], ad.Tensor],
        predict: Callable[[np.ndarray], np.ndarray], targets: np.ndarray,
        train_idx: np.ndarray, val_idx: np.ndarray, *, loss: str, lr: float, epochs: int,
        batch_size: int | None, patience: int, seed: int) -> TrainLog:
    """Adam on ``params`` in place; leaves the best-validation values loaded.

    ``forward(idx)`` builds a differentiable prediction for the records in
    ``idx``; ``predict(idx)`` is the tape-free equivalent used for validation.
    Without validation records the training loss drives model selection.
    """
    names = sorted(params)
    plist = [params[k] for k in names]
    state = ad.AdamState(lr=lr)
    rng = np.random.default_rng(seed)
    select_idx = val_idx if len(val_idx) else train_idx
    best = [p.data.copy() for p in plist]
    out = TrainLog()
    stall = 0
    for epoch in range(epochs):
        order = rng.permutation(train_idx)
        step = len(order) if not batch_size else batch_size
        for start in range(0, len(order), step):
            batch = order[start:start + step]
            ad.zero_grad(plist)
            value = loss_tensor(forward(batch), targets[batch], loss)
            if not np.isfinite(value.data):
                raise TrainingError(f"non-finite training loss at epoch {epoch}")
            value.backward()
            grads = [p.grad if p.grad is not None else np.zeros_like(p.data) for p in plist]
            try:
                ad.adam_step(plist, grads, state)
            except ad.NonFiniteError as exc:
                raise TrainingError(f"epoch {epoch}: {exc}") from None
        current = loss_value(predict(select_idx), targets[select_idx], loss)
        if not np.isfinite(current):
            raise TrainingError(f"non-finite validation loss at epoch {epoch}")
        out.epochs_run = epoch + 1
        if current < out.best_loss:
            out.best_loss = current
            out.best_epoch = epoch
            out.best_history.append((epoch, current))
            best = [p.data.copy() for p in plist]
            stall = 0
        else:
            stall += 1
            if stall >= patience:
                log.info("early stop at epoch %d (best %d)", epoch, out.best_epoch)
                break
    for p, b in zip(plist, best):
        p.data = b
    return out
