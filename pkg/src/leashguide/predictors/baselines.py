"""Reference predictors that the learned models are compared against.

Each exposes ``predict(dataset, idx) -> (n, 2)`` like ``NeuralPredictor``.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..nn import SeqModel
from .data import SequenceDataset


@dataclass
class NeuralPredictor:
    model: SeqModel
    chunk: int = 4096

    def predict(self, ds: SequenceDataset, idx) -> np.ndarray:
        idx = np.asarray(idx)
        out = [self.model.forward(ds.windows(idx[s:s + self.chunk])) for s in range(0, len(idx), self.chunk)]
        return np.concatenate(out) if out else np.zeros((0, 2))


def _last_force(ds: SequenceDataset, idx):
    """Tension channels of the last window row (the current tension)."""
    rows = ds.sample_rows[idx] - 1
    return ds.features[rows][:, list(ds.exogenous[-2:])]


@dataclass
class LinearModel:
    """v = A F + b fit by least squares on the current tension."""

    A: np.ndarray  # (2, 2)
    b: np.ndarray  # (2,)

    def __call__(self, F) -> np.ndarray:
        return np.asarray(F, float) @ self.A.T + self.b

    def predict(self, ds: SequenceDataset, idx) -> np.ndarray:
        return self(_last_force(ds, np.asarray(idx)))


def fit_linear(F, v) -> LinearModel:
    """Minimum-norm least squares over ``[F, 1]``; exact when the data allow it."""
    F = np.atleast_2d(np.asarray(F, float))
    v = np.atleast_2d(np.asarray(v, float))
    mu_F, mu_v = F.mean(0), v.mean(0)
    # centering decouples the intercept, so a zero-force set gives A = 0, b = mean v
    A_t, *_ = np.linalg.lstsq(F - mu_F, v - mu_v, rcond=None)
    A = A_t.T
    return LinearModel(A, mu_v - A @ mu_F)


def baseline_linear(ds: SequenceDataset, idx=None) -> LinearModel:
    idx = np.arange(len(ds)) if idx is None else np.asarray(idx)
    return fit_linear(_last_force(ds, idx), ds.labels(idx))


def geoc_velocity(window, force_channels=(2, 3), velocity_channels=(0, 1)) -> np.ndarray:
    """Geometric surrogate for the coupled baseline.

    Speed is the mean speed over the window; direction follows the current
    pull on the human, which points from the human toward the robot. With
    no pull the mean velocity direction is kept.
    """
    w = np.asarray(window, float)
    single = w.ndim == 2
    if single:
        w = w[None]
    v = w[:, :, list(velocity_channels)]
    speed = np.linalg.norm(v, axis=2).mean(1)
    f = w[:, -1, list(force_channels)]
    fn = np.linalg.norm(f, axis=1)
    vm = v.mean(1)
    vn = np.linalg.norm(vm, axis=1)
    d = np.zeros_like(f)
    pull = fn > 1e-12
    d[pull] = f[pull] / fn[pull, None]
    drift = ~pull & (vn > 1e-12)
    d[drift] = vm[drift] / vn[drift, None]
    out = speed[:, None] * d
    return out[0] if single else out


def baseline_geoc(window) -> np.ndarray:
    return geoc_velocity(window)


class GeoCBaseline:
    def predict(self, ds: SequenceDataset, idx) -> np.ndarray:
        return geoc_velocity(ds.windows(np.asarray(idx)), force_channels=ds.exogenous[-2:])


@dataclass
class VDCMModel:
    """v = u - D F with diagonal D; u and F are taken from the current row."""

    D: np.ndarray  # (2, 2) diagonal

    def __call__(self, u, F) -> np.ndarray:
        return np.asarray(u, float)[..., :2] - np.asarray(F, float) @ self.D.T

    def predict(self, ds: SequenceDataset, idx) -> np.ndarray:
        rows = ds.sample_rows[np.asarray(idx)] - 1
        feats = ds.features[rows]
        return self(feats[:, 2:4], feats[:, 5:7])


def fit_vdcm(u, v, F, tol: float = 1e-12) -> VDCMModel:
    """Per-axis least squares of (u - v) on F through the origin.

    An axis that never sees force is rank deficient; its coefficient is 0.
    """
    u = np.asarray(u, float)[:, :2]
    r = u - np.asarray(v, float)
    F = np.asarray(F, float)
    num = np.sum(r * F, axis=0)
    den = np.sum(F * F, axis=0)
    scale = max(1.0, float(np.max(den))) if den.size else 1.0
    d = np.where(den > tol * scale, num / np.where(den > 0, den, 1.0), 0.0)
    return VDCMModel(np.diag(d))


def baseline_vdcm(ds: SequenceDataset, idx=None) -> VDCMModel:
    idx = np.arange(len(ds)) if idx is None else np.asarray(idx)
    rows = ds.sample_rows[idx] - 1
    feats = ds.features[rows]
    return fit_vdcm(feats[:, 2:4], ds.labels(idx), feats[:, 5:7])
