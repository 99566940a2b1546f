"""Grid path -> smooth arc-length path -> speed-matched waypoints.

Redundant grid points are removed by two pruners (line-of-sight, then
turning-angle), the survivors are joined by a natural cubic spline, and the
spline is reparameterized by arc length so that waypoints can be placed at
exact along-path distances.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass

import numpy as np
from scipy.interpolate import CubicSpline

from .core import Timebase
from .worldmap import DiscretePath, GridMap, segment_is_free

_GL_X, _GL_W = np.polynomial.legendre.leggauss(12)


def lops_prune(path: DiscretePath, grid: GridMap) -> np.ndarray:
    """Line-of-sight pruning of a grid path.

    Point ``i`` survives only if the segment from the last kept point to point
    ``i + 1`` would cross an occupied cell. Joining the survivors with straight
    segments is therefore collision-free.
    """
    pts = np.asarray(path.world_points, dtype=float)
    if len(pts) <= 2:
        return pts.copy()
    kept = [pts[0]]
    for i in range(1, len(pts) - 1):
        if not segment_is_free(grid, kept[-1], pts[i + 1]):
            kept.append(pts[i])
    kept.append(pts[-1])
    return np.array(kept)


def turning_angle(a, b, c) -> float:
    u = np.asarray(b, float)[:2] - np.asarray(a, float)[:2]
    w = np.asarray(c, float)[:2] - np.asarray(b, float)[:2]
    nu, nw = np.linalg.norm(u), np.linalg.norm(w)
    if nu == 0 or nw == 0:
        return 0.0
    cross = u[0] * w[1] - u[1] * w[0]
    return abs(math.atan2(cross, float(u @ w)))


def wrps_prune(points, angle_threshold: float = 0.05) -> np.ndarray:
    """Drop interior points that turn the path by less than ``angle_threshold``.

    The angle at a candidate is measured between the incoming segment from
    the last kept point and the outgoing segment to the next candidate.
    """
    pts = np.asarray(points, dtype=float)
    if len(pts) < 2:
        raise ValueError("need at least 2 points")
    if len(pts) == 2:
        return pts.copy()
    kept = [pts[0]]
    for i in range(1, len(pts) - 1):
        if turning_angle(kept[-1], pts[i], pts[i + 1]) >= angle_threshold:
            kept.append(pts[i])
    kept.append(pts[-1])
    return np.array(kept)


class AnalyticPath:
    """Natural cubic spline through control points, queried by arc length.

    The spline is parameterized by cumulative chord length ``u``; arc length
    per knot interval is integrated with 12-point Gauss-Legendre and the
    inverse map ``s -> u`` is solved by safeguarded Newton iteration.
    """

    def __init__(self, control_points):
        pts = np.asarray(control_points, dtype=float)
        if pts.ndim != 2 or len(pts) < 2:
            raise ValueError("need at least 2 control points")
        xy = pts[:, :2]
        chords = np.linalg.norm(np.diff(xy, axis=0), axis=1)
        if np.any(chords <= 1e-12):
            raise ValueError("duplicate consecutive control points")
        self.control_points = np.column_stack([xy, np.zeros(len(xy))])
        self.knots = np.concatenate([[0.0], np.cumsum(chords)])
        self.spline = CubicSpline(self.knots, xy, bc_type="natural")
        self._d1 = self.spline.derivative(1)
        seg = self._seg_length(np.arange(len(chords)), self.knots[1:])
        self.arclength_table = np.concatenate([[0.0], np.cumsum(seg)])
        self.total_length = float(self.arclength_table[-1])
        self._dense_s = None

    @property
    def coefficients(self) -> np.ndarray:
        """Per-interval cubic coefficients, shape (4, n_intervals, 2)."""
        return self.spline.c

    def _speed(self, u):
        d = self._d1(u)
        return np.hypot(d[..., 0], d[..., 1])

    def _seg_length(self, idx, u):
        """Arc length from knot ``idx`` to parameter ``u``, elementwise."""
        u = np.asarray(u, dtype=float)
        a = self.knots[idx]
        half = 0.5 * (u - a)
        nodes = np.asarray(a)[..., None] + half[..., None] * (_GL_X + 1.0)
        return half * (self._speed(nodes) @ _GL_W)

    def param_at(self, s):
        s = np.clip(np.asarray(s, dtype=float), 0.0, self.total_length)
        scalar = s.ndim == 0
        s = np.atleast_1d(s)
        idx = np.clip(np.searchsorted(self.arclength_table, s, side="right") - 1, 0, len(self.knots) - 2)
        a, b = self.knots[idx], self.knots[idx + 1]
        target = s - self.arclength_table[idx]
        seg_len = self.arclength_table[idx + 1] - self.arclength_table[idx]
        u = a + (b - a) * np.where(seg_len > 0, target / np.where(seg_len > 0, seg_len, 1.0), 0.0)
        lo, hi = a.copy(), b.copy()
        for _ in range(60):
            f = self._seg_length(idx, u) - target
            lo = np.where(f < 0, u, lo)
            hi = np.where(f > 0, u, hi)
            step = f / np.maximum(self._speed(u), 1e-12)
            un = u - step
            bad = (un < lo) | (un > hi)
            un = np.where(bad, 0.5 * (lo + hi), un)
            if np.all(np.abs(un - u) < 1e-14 * (1.0 + np.abs(u))):
                u = un
                break
            u = un
        return float(u[0]) if scalar else u

    def point_at(self, s) -> np.ndarray:
        u = self.param_at(s)
        xy = self.spline(u)
        if np.ndim(u) == 0:
            return np.array([xy[0], xy[1], 0.0])
        return np.column_stack([xy, np.zeros(len(xy))])

    def tangent_at(self, s) -> np.ndarray:
        d = self._d1(self.param_at(s))
        n = np.linalg.norm(d, axis=-1, keepdims=True)
        t = d / np.maximum(n, 1e-12)
        if t.ndim == 1:
            return np.array([t[0], t[1], 0.0])
        return np.column_stack([t, np.zeros(len(t))])

    def heading_at(self, s) -> float:
        t = self.tangent_at(s)
        return math.atan2(t[1], t[0])

    def sample(self, ds: float = 0.05) -> tuple[np.ndarray, np.ndarray]:
        n = max(2, int(math.ceil(self.total_length / ds)) + 1)
        s = np.linspace(0.0, self.total_length, n)
        return s, self.point_at(s)

    def dense_table(self):
        """Cached ``(s, points)`` sampled every 2 cm."""
        if self._dense_s is None:
            self._dense_s, self._dense_p = self.sample(0.02)
        return self._dense_s, self._dense_p

    def project(self, p, s_hint: float | None = None, window: float | None = None) -> float:
        """Arc length of the path point nearest to ``p``.

        A hint plus window restricts the search to ``[hint - window, hint +
        window]``, which keeps progress monotone on paths that fold back.
        """
        s_all, p_all = self.dense_table()
        q = np.asarray(p, dtype=float)[:2]
        mask = slice(None)
        if s_hint is not None and window is not None:
            mask = (s_all >= s_hint - window) & (s_all <= s_hint + window)
            if not np.any(mask):
                mask = slice(None)
        ss, pp = s_all[mask], p_all[mask]
        j = int(np.argmin(np.sum((pp[:, :2] - q) ** 2, axis=1)))
        lo = max(0.0, ss[j] - 0.02)
        hi = min(self.total_length, ss[j] + 0.02)
        for _ in range(4):
            cand = np.linspace(lo, hi, 41)
            d2 = np.sum((self.point_at(cand)[:, :2] - q) ** 2, axis=1)
            k = int(np.argmin(d2))
            step = cand[1] - cand[0]
            lo, hi = max(0.0, cand[k] - step), min(self.total_length, cand[k] + step)
        return float(cand[k])

    def to_csv(self, path, ds: float = 0.05):
        s, pts = self.sample(ds)
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["s", "x", "y"])
            for si, p in zip(s, pts):
                w.writerow([repr(float(si)), repr(float(p[0])), repr(float(p[1]))])


def spline_interpolate(points) -> AnalyticPath:
    return AnalyticPath(points)


def smooth_path(path: DiscretePath, grid: GridMap, angle_threshold: float = 0.05) -> AnalyticPath:
    """Dijkstra cells -> line-of-sight prune -> turning-angle prune -> spline."""
    pts = lops_prune(path, grid)
    if len(pts) < 2:
        pts = np.array([pts[0], pts[0] + np.array([1e-3, 0.0, 0.0])])
    pts = wrps_prune(pts, angle_threshold)
    return spline_interpolate(pts)


@dataclass(frozen=True)
class WaypointPlan:
    points: np.ndarray  # (horizon, 3)
    spacings: np.ndarray  # (horizon - 1,)
    arclengths: np.ndarray  # (horizon,)

    @property
    def horizon(self) -> int:
        return len(self.points)


def select_waypoints(path: AnalyticPath, s0: float, predicted_speed, horizon: int,
                     timebase: Timebase) -> WaypointPlan:
    """Waypoints ``points[k] = path(s0 + T * sum(speed[:k]))``, clamped at the end.

    ``predicted_speed`` is a scalar or one speed per step (length
    ``horizon - 1``); consecutive waypoints are then ``speed * T`` apart in
    arc length.
    """
    if horizon < 1:
        raise ValueError("horizon must be >= 1")
    speeds = np.asarray(predicted_speed, dtype=float)
    if speeds.ndim == 0:
        speeds = np.full(horizon - 1, float(speeds))
    if speeds.shape != (horizon - 1,):
        raise ValueError(f"expected {horizon - 1} speeds, got {speeds.shape}")
    if np.any(speeds < 0) or not np.all(np.isfinite(speeds)):
        raise ValueError("predicted speed must be finite and >= 0")
    if not -1e-9 <= s0 <= path.total_length + 1e-9:
        raise ValueError(f"s0={s0} outside [0, {path.total_length}]")
    steps = speeds * timebase.period_T
    s = np.minimum(s0 + np.concatenate([[0.0], np.cumsum(steps)]), path.total_length)
    pts = path.point_at(s)
    spacings = np.linalg.norm(np.diff(pts, axis=0), axis=1)
    return WaypointPlan(pts, spacings, s)
