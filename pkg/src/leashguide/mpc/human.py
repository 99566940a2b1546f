"""Planner for the leash: tension vector, leash length and bearing over a horizon.

Decision vector per step ``k`` (four blocks of length ``M``)::

    m_k      tension magnitude            in [F_min, F_max]
    d_k      tension angle increment      in [-phi_F, phi_F]
    l_k      leash length                 in [l_min, l_max]
    r_k      bearing offset from tension  in [-phi_theta, phi_theta]

with ``a_k = a_now + sum(d_0..d_k)``, ``F_k = m_k (cos a_k, sin a_k)`` and
``theta_k = a_k + r_k``. Box bounds on these blocks encode the magnitude,
length and both angle constraints exactly, so only obstacle clearance
needs a penalty. ``theta`` is the bearing from the human to the robot;
the tension on the human points the same way.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from ..core import make_rng, wrap_angle
from ..nn import rollout, rollout_backward
from .shooting import ShootingConfig, cem_minimize, refine

HUMAN_FEEDBACK = (0, 1)
HUMAN_EXO = (2, 3)
TERMS = ("tracking", "force_vector", "force_magnitude", "bearing", "length")


class Infeasible(ValueError):
    pass


def as_weight(w, dim: int = 2) -> np.ndarray:
    w = np.asarray(w, float)
    if w.ndim == 0:
        return float(w) * np.eye(dim)
    if w.ndim == 1:
        return np.diag(w[:dim])
    return w[:dim, :dim]


def _unit(a):
    return np.stack([np.cos(a), np.sin(a)], axis=-1)


@dataclass
class HumanPlanProblem:
    waypoints: np.ndarray  # (M, 2)
    history: np.ndarray  # (W, 4): v_x, v_y, F_x, F_y; last row is the current step
    x_start: np.ndarray  # position the rollout integrates from
    period: float
    F_now: float
    angle_now: float  # direction of the current tension on the human
    l_now: float
    theta_now: float
    w1: object = 1.0
    w2: object = 0.0
    w3: float = 0.0
    w4: float = 0.0
    w5: float = 0.0
    F_min: float = 2.0
    F_max: float = 20.0
    l_min: float = 0.8
    l_max: float = 1.5
    phi_F: float = 0.5
    phi_theta: float = 0.5
    obstacles: np.ndarray = field(default_factory=lambda: np.zeros((0, 2)))
    r_obs: float = 0.0

    def __post_init__(self):
        self.waypoints = np.atleast_2d(np.asarray(self.waypoints, float))[:, :2]
        self.history = np.asarray(self.history, float)
        self.x_start = np.asarray(self.x_start, float)[:2]
        self.obstacles = np.asarray(self.obstacles, float).reshape(-1, 2)
        self.W1, self.W2 = as_weight(self.w1), as_weight(self.w2)
        if not self.F_min < self.F_max:
            raise ValueError("F_min must be below F_max")
        if not self.l_min < self.l_max:
            raise ValueError("l_min must be below l_max")
        if self.r_obs < 0 or min(self.w3, self.w4, self.w5) < 0:
            raise ValueError("clearance and weights must be non-negative")
        if np.any(np.linalg.eigvalsh((self.W1 + self.W1.T) / 2) < -1e-12) or \
                np.any(np.linalg.eigvalsh((self.W2 + self.W2.T) / 2) < -1e-12):
            raise ValueError("weight matrices must be positive semidefinite")

    @property
    def horizon(self) -> int:
        return len(self.waypoints)

    def bounds(self):
        M = self.horizon
        lo = np.concatenate([np.full(M, self.F_min), np.full(M, -self.phi_F),
                             np.full(M, self.l_min), np.full(M, -self.phi_theta)])
        hi = np.concatenate([np.full(M, self.F_max), np.full(M, self.phi_F),
                             np.full(M, self.l_max), np.full(M, self.phi_theta)])
        return lo, hi

    def hold(self) -> np.ndarray:
        """Decision vector that keeps the current leash state for the whole horizon."""
        M = self.horizon
        return np.concatenate([np.full(M, self.F_now), np.zeros(M), np.full(M, self.l_now),
                               np.full(M, wrap_angle(self.theta_now - self.angle_now))])

    def check_hold(self, tol: float = 1e-9):
        if not self.F_min - tol <= self.F_now <= self.F_max + tol:
            raise Infeasible(f"current tension {self.F_now} outside [{self.F_min}, {self.F_max}]")
        if not self.l_min - tol <= self.l_now <= self.l_max + tol:
            raise Infeasible(f"current leash length {self.l_now} outside [{self.l_min}, {self.l_max}]")
        off = abs(wrap_angle(self.theta_now - self.angle_now))
        if off > self.phi_theta + tol:
            raise Infeasible(f"current bearing is {off:.3f} rad from the tension, limit {self.phi_theta}")


@dataclass
class HumanPlanSolution:
    F: np.ndarray  # (M, 2) tension on the human
    magnitude: np.ndarray
    angle: np.ndarray
    l: np.ndarray
    theta: np.ndarray
    x_pred: np.ndarray  # predicted human positions
    robot_targets: np.ndarray  # waypoints + l e_theta
    cost: float
    breakdown: dict
    violation: float
    z: np.ndarray
    history: list = field(default_factory=list)

    @property
    def feasible(self) -> bool:
        return self.violation <= 1e-6


def decode(problem: HumanPlanProblem, Z):
    """Decision vectors ``(N, 4M)`` to ``(F, magnitude, angle, l, theta)``."""
    Z = np.atleast_2d(Z)
    M = problem.horizon
    m, d, l, r = Z[:, :M], Z[:, M:2 * M], Z[:, 2 * M:3 * M], Z[:, 3 * M:]
    a = problem.angle_now + np.cumsum(d, axis=1)
    F = m[..., None] * _unit(a)
    return F, m, a, l, a + r


def encode(problem: HumanPlanProblem, magnitude, angle, l, theta) -> np.ndarray:
    a = np.asarray(angle, float)
    prev = np.concatenate([[problem.angle_now], a[:-1]])
    return np.concatenate([magnitude, wrap_angle(a - prev), l, wrap_angle(np.asarray(theta) - a)])


def rollout_human(model, history, F_plan, x_start, period: float, keep_cache: bool = False):
    """Predicted human positions under a planned tension sequence ``(M, 2)`` or ``(N, M, 2)``."""
    return rollout(model, history, F_plan, x_start, period, HUMAN_FEEDBACK, HUMAN_EXO,
                   keep_cache=keep_cache)


def _terms(p: HumanPlanProblem, F, m, l, th, X):
    """Per-candidate cost terms; arrays carry a leading batch axis."""
    e = X - p.waypoints[None]
    track = 0.5 * np.einsum("nki,ij,nkj->n", e, p.W1, e)
    F_prev = np.concatenate([np.broadcast_to(p.F_now * _unit(p.angle_now), (len(F), 1, 2)), F[:, :-1]], 1)
    dF = F - F_prev
    fvec = 0.5 * np.einsum("nki,ij,nkj->n", dF, p.W2, dF)
    m_prev = np.concatenate([np.full((len(m), 1), p.F_now), m[:, :-1]], 1)
    fmag = p.w3 * np.sum((m - m_prev) ** 2, 1)
    th_prev = np.concatenate([np.full((len(th), 1), p.theta_now), th[:, :-1]], 1)
    bear = p.w4 * np.sum(1.0 - np.cos(th - th_prev), 1)
    l_prev = np.concatenate([np.full((len(l), 1), p.l_now), l[:, :-1]], 1)
    leng = p.w5 * np.sum((l - l_prev) ** 2, 1)
    return {"tracking": track, "force_vector": fvec, "force_magnitude": fmag, "bearing": bear, "length": leng}


def _depths(p: HumanPlanProblem, X, l, th):
    """Clearance shortfall of predicted human points and predicted robot points."""
    if len(p.obstacles) == 0 or p.r_obs <= 0:
        z = np.zeros(X.shape[:2] + (0,))
        return z, z, None, None
    R = X + l[..., None] * _unit(th)
    dh = X[:, :, None, :] - p.obstacles[None, None]
    dr = R[:, :, None, :] - p.obstacles[None, None]
    nh = np.linalg.norm(dh, axis=-1)
    nr = np.linalg.norm(dr, axis=-1)
    return np.maximum(p.r_obs - nh, 0.0), np.maximum(p.r_obs - nr, 0.0), (dh, nh), (dr, nr)


def human_cost(problem: HumanPlanProblem, F, l, theta, x_pred):
    """``(J, breakdown)`` for one candidate; breakdown terms sum to ``J``."""
    F = np.asarray(F, float)[None]
    t = _terms(problem, F, np.linalg.norm(F, axis=-1), np.asarray(l, float)[None],
               np.asarray(theta, float)[None], np.asarray(x_pred, float)[None])
    br = {k: float(v[0]) for k, v in t.items()}
    return sum(br[k] for k in TERMS), br


def constraint_violation(problem: HumanPlanProblem, F, l, theta, x_pred) -> dict:
    """Largest violation of each constraint family for one plan (0 when satisfied)."""
    mag = np.linalg.norm(F, axis=-1)
    ang = np.arctan2(F[:, 1], F[:, 0])
    prev = np.concatenate([[problem.angle_now], ang[:-1]])
    dh, dr, _, _ = _depths(problem, np.asarray(x_pred)[None], np.asarray(l)[None], np.asarray(theta)[None])
    return {
        "magnitude": float(max(0.0, np.max(problem.F_min - mag), np.max(mag - problem.F_max))),
        "length": float(max(0.0, np.max(problem.l_min - l), np.max(l - problem.l_max))),
        "force_turn": float(max(0.0, np.max(np.abs(wrap_angle(ang - prev)) - problem.phi_F))),
        "bearing": float(max(0.0, np.max(np.abs(wrap_angle(np.asarray(theta) - ang)) - problem.phi_theta))),
        "human_clearance": float(dh.max()) if dh.size else 0.0,
        "robot_clearance": float(dr.max()) if dr.size else 0.0,
    }


def _evaluator(problem: HumanPlanProblem, model):
    def evaluate(Z):
        F, m, a, l, th = decode(problem, Z)
        hist = np.broadcast_to(problem.history, (len(Z),) + problem.history.shape)
        xs = np.broadcast_to(problem.x_start, (len(Z), 2))
        X = rollout_human(model, hist, F, xs, problem.period).positions
        cost = sum(_terms(problem, F, m, l, th, X).values())
        dh, dr, _, _ = _depths(problem, X, l, th)
        viol = np.zeros(len(Z))
        if dh.size:
            viol = np.maximum(dh.reshape(len(Z), -1).max(1), dr.reshape(len(Z), -1).max(1))
        return cost, viol
    return evaluate


def human_value_grad(problem: HumanPlanProblem, model, z, penalty: float):
    """Penalized cost of one decision vector and its gradient."""
    p = problem
    M = p.horizon
    F, m, a, l, th = decode(p, z[None])
    res = rollout_human(model, p.history[None], F, p.x_start[None], p.period, keep_cache=True)
    X = res.positions
    t = _terms(p, F, m, l, th, X)
    dh, dr, hgeo, rgeo = _depths(p, X, l, th)
    val = float(sum(v[0] for v in t.values()) + penalty * (np.sum(dh ** 2) + np.sum(dr ** 2)))
    W1s, W2s = (p.W1 + p.W1.T) / 2, (p.W2 + p.W2.T) / 2
    dX = (X - p.waypoints[None]) @ W1s.T
    F_prev = np.concatenate([(p.F_now * _unit(p.angle_now))[None, None], F[:, :-1]], 1)
    g = (F - F_prev) @ W2s.T
    dF = g.copy()
    dF[:, :-1] -= g[:, 1:]
    m_prev = np.concatenate([[[p.F_now]], m[:, :-1]], 1)
    gm = 2 * p.w3 * (m - m_prev)
    dm = gm.copy()
    dm[:, :-1] -= gm[:, 1:]
    th_prev = np.concatenate([[[p.theta_now]], th[:, :-1]], 1)
    gt = p.w4 * np.sin(th - th_prev)
    dth = gt.copy()
    dth[:, :-1] -= gt[:, 1:]
    l_prev = np.concatenate([[[p.l_now]], l[:, :-1]], 1)
    gl = 2 * p.w5 * (l - l_prev)
    dl = gl.copy()
    dl[:, :-1] -= gl[:, 1:]
    if hgeo is not None:
        diff, n = hgeo
        dX += np.sum((-2 * penalty * dh / np.maximum(n, 1e-12))[..., None] * diff, axis=2)
        diff, n = rgeo
        dR = np.sum((-2 * penalty * dr / np.maximum(n, 1e-12))[..., None] * diff, axis=2)
        dX += dR
        u = _unit(th)
        dl += np.sum(dR * u, -1)
        dth += l * np.sum(dR * np.stack([-u[..., 1], u[..., 0]], -1), -1)
    _, _, d_exo = rollout_backward(model, res, p.period, HUMAN_FEEDBACK, HUMAN_EXO, d_positions=dX)
    dF += d_exo
    ua = _unit(a)
    dm += np.sum(dF * ua, -1)
    da = m * np.sum(dF * np.stack([-ua[..., 1], ua[..., 0]], -1), -1) + dth
    dd = np.cumsum(da[:, ::-1], axis=1)[:, ::-1]
    grad = np.concatenate([dm[0], dd[0], dl[0], dth[0]])
    return val, grad


def shift_plan(z: np.ndarray, M: int) -> np.ndarray:
    """Warm start for the next cycle: drop the executed step, repeat the last."""
    blocks = z.reshape(4, M)
    out = np.concatenate([blocks[:, 1:], blocks[:, -1:]], axis=1)
    out[1, -1] = 0.0
    return out.ravel()


def solve_human_plan(problem: HumanPlanProblem, model, config: ShootingConfig = ShootingConfig(),
                     warm_start=None) -> HumanPlanSolution:
    problem.check_hold()
    p = problem
    M = p.horizon
    lo, hi = p.bounds()
    z_hold = np.clip(p.hold(), lo, hi)
    scale = np.concatenate([np.full(M, p.F_max - p.F_min), np.full(M, p.phi_F),
                            np.full(M, p.l_max - p.l_min), np.full(M, p.phi_theta)])
    mean = z_hold if warm_start is None else np.asarray(warm_start, float)
    rng = make_rng(config.seed, 301)
    evaluate = _evaluator(p, model)
    extra = [z_hold] if warm_start is None else [z_hold, mean]
    res = cem_minimize(evaluate, mean, scale, lo, hi, config, rng, extra=extra)
    z, cost, viol = res.z, res.cost, res.violation
    if config.refine_steps > 0:
        fg = lambda v: human_value_grad(p, model, v, config.penalty_obstacle)
        zr, _ = refine(fg, z, lo, hi, config, config.refine_step_size * scale.mean())
        cr, vr = evaluate(zr[None])
        if (vr[0] <= 1e-6 or vr[0] <= viol) and (cr[0] < cost or vr[0] < viol and viol > 1e-6):
            z, cost, viol = zr, float(cr[0]), float(vr[0])
    F, m, a, l, th = decode(p, z[None])
    X = rollout_human(model, p.history, F[0], p.x_start, p.period).positions
    J, br = human_cost(p, F[0], l[0], th[0], X)
    targets = p.waypoints + l[0][:, None] * _unit(th[0])
    return HumanPlanSolution(F[0], m[0], a[0], l[0], th[0], X, targets, J, br, viol, z, res.history)
