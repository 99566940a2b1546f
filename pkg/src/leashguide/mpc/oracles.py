"""Exactly linear stand-ins for the learned models.

``v = A @ last_row + b`` where ``last_row`` is the newest window row. They
share the forward/backward interface of ``SeqModel`` so planners and
rollouts accept either.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np


@dataclass(frozen=True)
class _Spec:
    window: int
    input_channels: int
    output_dim: int = 2


class LinearLawModel:
    def __init__(self, A, b=None, window: int = 20):
        self.A = np.asarray(A, float)
        D, C = self.A.shape
        self.b = np.zeros(D) if b is None else np.asarray(b, float)
        self.spec = _Spec(window, C, D)

    def forward_cached(self, X):
        X = np.asarray(X, float)
        squeeze = X.ndim == 2
        if squeeze:
            X = X[None]
        if X.shape[1:] != (self.spec.window, self.spec.input_channels):
            raise ValueError(f"window shape {X.shape[1:]} does not match "
                             f"({self.spec.window}, {self.spec.input_channels})")
        y = X[:, -1] @ self.A.T + self.b
        return (y[0] if squeeze else y), (X.shape, squeeze)

    def forward(self, X):
        return self.forward_cached(X)[0]

    __call__ = forward

    def backward(self, cache, dY):
        if cache is None:
            raise RuntimeError("backward called before forward")
        shape, squeeze = cache
        dY = np.asarray(dY, float)
        if squeeze:
            dY = dY[None]
        dX = np.zeros(shape)
        dX[:, -1] = dY @ self.A
        return {}, (dX[0] if squeeze else dX)


def tension_law(c: float, window: int = 20) -> LinearLawModel:
    """Human oracle ``v = c * F`` on channels ``[v_x, v_y, F_x, F_y]``."""
    A = np.zeros((2, 4))
    A[0, 2] = A[1, 3] = c
    return LinearLawModel(A, window=window)


def human_recursion_law(a: float = 0.9, c: float = 0.01, window: int = 20) -> LinearLawModel:
    """``v_{k+1} = a v_k + c F_k`` on human channels."""
    A = np.zeros((2, 4))
    A[0, 0] = A[1, 1] = a
    A[0, 2] = A[1, 3] = c
    return LinearLawModel(A, window=window)


def tracking_law(window: int = 20) -> LinearLawModel:
    """Robot oracle ``v = u`` on channels ``[v_x, v_y, u_x, u_y, u_w, F_x, F_y]``."""
    return vdcm_law(0.0, window)


def vdcm_law(d: float, window: int = 20) -> LinearLawModel:
    """Robot oracle ``v = u - d F``."""
    A = np.zeros((2, 7))
    A[0, 2] = A[1, 3] = 1.0
    A[0, 5] = A[1, 6] = -d
    return LinearLawModel(A, window=window)
