"""Planner for the robot's velocity command over a horizon.

Commands are world-frame ``(u_x, u_y, u_w)`` and live in a box, so every
sampled candidate is clamped into bounds and is feasible by construction.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from ..core import make_rng
from ..nn import rollout, rollout_backward
from .human import as_weight
from .shooting import ShootingConfig, cem_minimize, refine

ROBOT_FEEDBACK = (0, 1)
ROBOT_EXO = (2, 3, 4, 5, 6)


@dataclass
class RobotPlanProblem:
    targets: np.ndarray  # (M, 2)
    history: np.ndarray  # (W, 7): v_x, v_y, u_x, u_y, u_w, F_x, F_y
    x_start: np.ndarray
    period: float
    F_forecast: np.ndarray  # (M, 2) tension felt by the robot
    w6: object = 1.0
    w7: object = 0.0
    u_max: tuple = (1.5, 1.5, 1.0)

    def __post_init__(self):
        self.targets = np.atleast_2d(np.asarray(self.targets, float))[:, :2]
        self.history = np.asarray(self.history, float)
        self.x_start = np.asarray(self.x_start, float)[:2]
        self.F_forecast = np.asarray(self.F_forecast, float).reshape(len(self.targets), 2)
        self.u_max = np.asarray(self.u_max, float)
        self.W6, self.W7 = as_weight(self.w6, 2), as_weight(self.w7, 3)
        if np.any(self.u_max <= 0):
            raise ValueError("command bounds must be positive")
        for W in (self.W6, self.W7):
            if np.any(np.linalg.eigvalsh((W + W.T) / 2) < -1e-12):
                raise ValueError("weight matrices must be positive semidefinite")

    @property
    def horizon(self) -> int:
        return len(self.targets)

    def bounds(self):
        hi = np.tile(self.u_max, self.horizon)
        return -hi, hi


@dataclass
class RobotPlanSolution:
    u: np.ndarray  # (M, 3)
    x_pred: np.ndarray
    cost: float
    breakdown: dict
    z: np.ndarray
    history: list = field(default_factory=list)


def rollout_robot(model, history, u_plan, F_forecast, x_start, period: float, keep_cache: bool = False):
    """Predicted robot positions for commands ``(.., M, 3)`` and tension ``(.., M, 2)``."""
    exo = np.concatenate([np.asarray(u_plan, float), np.asarray(F_forecast, float)], axis=-1)
    return rollout(model, history, exo, x_start, period, ROBOT_FEEDBACK, ROBOT_EXO, keep_cache=keep_cache)


def _terms(p: RobotPlanProblem, U, X):
    e = X - p.targets[None]
    return {
        "tracking": 0.5 * np.einsum("nki,ij,nkj->n", e, p.W6, e),
        "effort": 0.5 * np.einsum("nki,ij,nkj->n", U, p.W7, U),
    }


def robot_cost(problem: RobotPlanProblem, u, x_pred):
    t = _terms(problem, np.asarray(u, float)[None], np.asarray(x_pred, float)[None])
    br = {k: float(v[0]) for k, v in t.items()}
    return br["tracking"] + br["effort"], br


def _rollout_batch(p, U, model, keep_cache=False):
    N = len(U)
    hist = np.broadcast_to(p.history, (N,) + p.history.shape)
    F = np.broadcast_to(p.F_forecast, (N,) + p.F_forecast.shape)
    return rollout_robot(model, hist, U, F, np.broadcast_to(p.x_start, (N, 2)), p.period, keep_cache)


def robot_value_grad(problem: RobotPlanProblem, model, z):
    p = problem
    U = z.reshape(1, p.horizon, 3)
    res = _rollout_batch(p, U, model, keep_cache=True)
    X = res.positions
    val = float(sum(v[0] for v in _terms(p, U, X).values()))
    dX = (X - p.targets[None]) @ ((p.W6 + p.W6.T) / 2).T
    _, _, d_exo = rollout_backward(model, res, p.period, ROBOT_FEEDBACK, ROBOT_EXO, d_positions=dX)
    dU = d_exo[:, :, :3] + U @ ((p.W7 + p.W7.T) / 2).T
    return val, dU.ravel()


def solve_robot_plan(problem: RobotPlanProblem, model, config: ShootingConfig = ShootingConfig(),
                     warm_start=None) -> RobotPlanSolution:
    p = problem
    M = p.horizon
    lo, hi = p.bounds()
    zero = np.zeros(3 * M)
    mean = zero if warm_start is None else np.clip(np.asarray(warm_start, float), lo, hi)
    rng = make_rng(config.seed, 302)

    def evaluate(Z):
        U = Z.reshape(len(Z), M, 3)
        X = _rollout_batch(p, U, model).positions
        return sum(_terms(p, U, X).values()), np.zeros(len(Z))

    extra = [zero] if warm_start is None else [zero, mean]
    res = cem_minimize(evaluate, mean, np.tile(p.u_max, M), lo, hi, config, rng, extra=extra)
    z, cost = res.z, res.cost
    if config.refine_steps > 0:
        zr, cr = refine(lambda v: robot_value_grad(p, model, v), z, lo, hi, config,
                        config.refine_step_size * float(np.mean(p.u_max)))
        if cr < cost:
            z, cost = zr, cr
    U = z.reshape(M, 3)
    X = rollout_robot(model, p.history, U, p.F_forecast, p.x_start, p.period).positions
    J, br = robot_cost(p, U, X)
    return RobotPlanSolution(U, X, J, br, z, res.history)


def shift_commands(z: np.ndarray, M: int) -> np.ndarray:
    U = z.reshape(M, 3)
    return np.concatenate([U[1:], U[-1:]]).ravel()
