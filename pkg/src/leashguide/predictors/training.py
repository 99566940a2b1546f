"""Minibatch Adam training of sequence regressors on the rollout position loss."""

from __future__ import annotations

import logging
from dataclasses import dataclass, field

import numpy as np

from ..core import make_rng
from ..nn import AdamState, ModelSpec, SeqModel, adam_step, build_model, rollout_loss
from .data import SequenceDataset

log = logging.getLogger(__name__)


class TrainingDiverged(FloatingPointError):
    pass


@dataclass
class TrainConfig:
    epochs: int = 50
    batch_size: int = 64
    lr: float = 1e-3
    lr_final: float | None = None  # geometric decay to this rate over the epochs
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    rollout_k: int = 10
    teacher_forcing: bool = False
    stride: int = 1  # train on every stride-th sample
    eval_samples: int = 2048  # monitor subset used for the loss curve
    seed: int = 0


@dataclass
class TrainHistory:
    initial_loss: float
    epoch_loss: list = field(default_factory=list)  # mean minibatch loss per epoch
    monitor_loss: list = field(default_factory=list)  # eval loss on the monitor subset
    best_epoch: int = -1

    @property
    def final_loss(self) -> float:
        return min([self.initial_loss] + self.monitor_loss)


def _arrays(ds: SequenceDataset, idx, K, teacher_forcing):
    h, e, xs, xt, te = ds.rollout_arrays(idx, K)
    return h, e, xs, xt, (te if teacher_forcing else None)


def fit_normalization(model: SeqModel, ds: SequenceDataset, idx=None) -> None:
    """Standardize with channel statistics of the training rows."""
    rows = ds.sample_rows if idx is None else ds.sample_rows[idx]
    used = np.unique((rows[:, None] + np.arange(-ds.window, 1)[None, :]).ravel())
    f = ds.features[used]
    out = ds.features[rows][:, list(ds.feedback)]
    model.set_normalization(f.mean(0), f.std(0), out.mean(0), out.std(0))


def batch_loss(model, ds: SequenceDataset, idx, K: int, teacher_forcing=False, chunk=1024) -> float:
    """Rollout loss over ``idx`` without gradients, evaluated in chunks."""
    total, n = 0.0, 0
    for s in range(0, len(idx), chunk):
        part = idx[s:s + chunk]
        h, e, xs, xt, te = _arrays(ds, part, K, teacher_forcing)
        loss, _ = rollout_loss(model, h, e, xs, xt, ds.period, ds.feedback, ds.exogenous,
                               teacher=te, with_grad=False)
        total += loss * len(part)
        n += len(part)
    return total / max(n, 1)


def train_predictor(dataset: SequenceDataset, spec: ModelSpec, config: TrainConfig = TrainConfig(),
                    model: SeqModel | None = None) -> tuple[SeqModel, TrainHistory]:
    """Train ``spec`` on ``dataset``; returns the best monitored model and its history.

    The returned parameters are those with the lowest monitor loss seen,
    the initial parameters included, so the final loss never exceeds the
    initial one.
    """
    if len(dataset) == 0:
        raise ValueError("cannot train on an empty dataset")
    if spec.window != dataset.window or spec.input_channels != dataset.input_channels:
        raise ValueError("model spec does not match dataset window/channels")
    K = min(config.rollout_k, dataset.rollout_k)
    rng = make_rng(config.seed, 202)
    if model is None:
        model = build_model(spec, config.seed)
        # a zero head predicts the label mean at first, which keeps the early rollouts from blowing up
        model.params["head.W"][:] = 0.0
        model.params["head.b"][:] = 0.0
    train_idx = np.arange(0, len(dataset), max(1, config.stride))
    fit_normalization(model, dataset, train_idx)

    if len(dataset) > config.eval_samples:
        mon = np.sort(make_rng(config.seed, 203).choice(len(dataset), config.eval_samples, replace=False))
    else:
        mon = np.arange(len(dataset))
    hist = TrainHistory(batch_loss(model, dataset, mon, K))
    best = hist.initial_loss
    best_params = {k: v.copy() for k, v in model.params.items()}

    state = AdamState(lr=config.lr, beta1=config.beta1, beta2=config.beta2, eps=config.eps)
    decay = 1.0
    if config.lr_final is not None and config.epochs > 1:
        decay = (config.lr_final / config.lr) ** (1.0 / (config.epochs - 1))
    for ep in range(config.epochs):
        state.lr = config.lr * decay ** ep
        order = train_idx[rng.permutation(len(train_idx))]
        losses = []
        for s in range(0, len(order), config.batch_size):
            part = np.sort(order[s:s + config.batch_size])
            h, e, xs, xt, te = _arrays(dataset, part, K, config.teacher_forcing)
            loss, grads = rollout_loss(model, h, e, xs, xt, dataset.period, dataset.feedback,
                                       dataset.exogenous, teacher=te, with_grad=True)
            if not np.isfinite(loss):
                raise TrainingDiverged(f"non-finite loss at epoch {ep}, batch {s // config.batch_size}")
            try:
                adam_step(state, model.params, grads)
            except FloatingPointError as exc:
                raise TrainingDiverged(f"epoch {ep}: {exc}") from exc
            losses.append(loss)
        hist.epoch_loss.append(float(np.mean(losses)))
        m = batch_loss(model, dataset, mon, K)
        if not np.isfinite(m):
            raise TrainingDiverged(f"non-finite monitor loss after epoch {ep}")
        hist.monitor_loss.append(m)
        if m < best:
            best, hist.best_epoch = m, ep
            best_params = {k: v.copy() for k, v in model.params.items()}
        log.debug("epoch %d train %.3e monitor %.3e", ep, hist.epoch_loss[-1], m)
    model.params = best_params
    return model, hist


def predict_velocity(model: SeqModel, window) -> np.ndarray:
    """One-step planar velocity for a window ``(W, C)`` or a batch ``(B, W, C)``."""
    return model.forward(window)


def predict_human(model: SeqModel, window) -> np.ndarray:
    return predict_velocity(model, window)


def predict_robot(model: SeqModel, window) -> np.ndarray:
    return predict_velocity(model, window)
