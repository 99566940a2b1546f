"""Shared domain types, time base and small geometry helpers.

Units everywhere: meters, m/s, newtons, radians, seconds. Vectors carry three
components; the third is pinned to zero in planar operation.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Literal

import numpy as np

UNIT_TOL = 1e-9


def wrap_angle(a):
    """Map angles into (-pi, pi]."""
    w = np.mod(np.asarray(a, dtype=float) + np.pi, 2.0 * np.pi) - np.pi
    w = np.where(w <= -np.pi, w + 2.0 * np.pi, w)
    if np.ndim(w) == 0:
        return float(w)
    return w


def vec3(v) -> np.ndarray:
    """Promote a 2- or 3-vector to a float array of length 3."""
    a = np.asarray(v, dtype=float).reshape(-1)
    if a.size == 2:
        a = np.array([a[0], a[1], 0.0])
    if a.size != 3:
        raise ValueError(f"expected 2 or 3 components, got {a.size}")
    return a


@dataclass(frozen=True)
class Timebase:
    period_T: float = 0.02

    def __post_init__(self):
        if not (self.period_T > 0 and math.isfinite(self.period_T)):
            raise ValueError(f"period_T must be positive, got {self.period_T}")

    @property
    def rate_hz(self) -> float:
        return 1.0 / self.period_T


@dataclass(frozen=True)
class PlanarState:
    x: np.ndarray = field(default_factory=lambda: np.zeros(3))
    v: np.ndarray = field(default_factory=lambda: np.zeros(3))
    theta: float = 0.0

    def __post_init__(self):
        x, v = vec3(self.x), vec3(self.v)
        if x[2] != 0.0 or v[2] != 0.0:
            raise ValueError("planar state requires zero third component")
        object.__setattr__(self, "x", x)
        object.__setattr__(self, "v", v)
        object.__setattr__(self, "theta", wrap_angle(self.theta))

    @property
    def speed(self) -> float:
        return float(np.hypot(self.v[0], self.v[1]))


@dataclass(frozen=True)
class UnitVecYaw:
    yaw: float

    @property
    def as_vector(self) -> np.ndarray:
        return np.array([math.cos(self.yaw), math.sin(self.yaw), 0.0])


@dataclass(frozen=True)
class TensionSample:
    """Leash tension magnitude and unit leash direction.

    ``direction`` follows the position-composition convention
    ``x_human = x_robot + l * direction``, i.e. it points from the robot to
    the human. The pull on the human is therefore ``-F * direction``.
    """

    magnitude: float
    direction: np.ndarray

    def __post_init__(self):
        d = vec3(self.direction)
        m = float(self.magnitude)
        if not math.isfinite(m) or m < 0:
            raise ValueError(f"tension magnitude must be finite and >= 0, got {m}")
        if not np.all(np.isfinite(d)) or abs(np.linalg.norm(d) - 1.0) > UNIT_TOL:
            raise ValueError(f"tension direction must be a unit vector, got {d}")
        object.__setattr__(self, "magnitude", m)
        object.__setattr__(self, "direction", d)


def decompose_tension(sample: TensionSample, side: Literal["human", "robot"]) -> np.ndarray:
    """Agent-frame force vector: ``-F e_l`` on the human, ``+F e_l`` on the robot."""
    if side == "human":
        return -sample.magnitude * sample.direction
    if side == "robot":
        return sample.magnitude * sample.direction
    raise ValueError(f"side must be 'human' or 'robot', got {side!r}")


def compose_human_position(robot_x, l: float, e_l) -> np.ndarray:
    if not l > 0:
        raise ValueError(f"leash length must be positive, got {l}")
    return vec3(robot_x) + l * vec3(e_l)


def finite_difference_velocity(positions, timebase: Timebase) -> np.ndarray:
    """Central differences inside, one-sided at both ends; same length as input.

    The end stencils are second order (exact for quadratics) once three or
    more samples are available.
    """
    p = np.asarray(positions, dtype=float)
    if p.ndim == 1:
        p = p[:, None]
    if p.shape[0] < 2:
        raise ValueError("need at least 2 positions to differentiate")
    order = 2 if p.shape[0] >= 3 else 1
    return np.gradient(p, timebase.period_T, axis=0, edge_order=order)


def moving_average(signal, window: int = 5) -> np.ndarray:
    """Centered moving average along axis 0; the window shrinks at the edges."""
    s = np.asarray(signal, dtype=float)
    if window <= 1 or s.shape[0] == 0:
        return s.copy()
    half = window // 2
    c = np.cumsum(np.concatenate([np.zeros((1,) + s.shape[1:]), s], axis=0), axis=0)
    n = s.shape[0]
    idx = np.arange(n)
    lo = np.clip(idx - half, 0, n)
    hi = np.clip(idx + half + 1, 0, n)
    counts = (hi - lo).reshape((-1,) + (1,) * (s.ndim - 1))
    return (c[hi] - c[lo]) / counts


def unit(v, eps: float = 1e-12):
    """Row-wise normalization; zero rows stay zero."""
    a = np.asarray(v, dtype=float)
    n = np.linalg.norm(a, axis=-1, keepdims=True)
    return np.where(n > eps, a / np.maximum(n, eps), 0.0)


def make_rng(seed, *stream) -> np.random.Generator:
    """Independent, reproducible generator for ``(seed, *stream)``."""
    ss = np.random.SeedSequence([int(seed)] + [int(s) for s in stream])
    return np.random.default_rng(ss)
