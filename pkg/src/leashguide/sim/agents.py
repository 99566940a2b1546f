"""First-order plant models for the guided person, the robot and the leash."""

from __future__ import annotations

from dataclasses import dataclass, asdict

import numpy as np

from ..core import PlanarState, Timebase, make_rng


@dataclass
class HumanAgentModel:
    comfortable_speed: float = 0.8  # m/s
    responsiveness: float = 0.1  # (m/s)/N
    time_constant: float = 0.4  # s
    heading_compliance: float = 0.5  # 0 keeps the current heading, 1 turns straight into the pull
    noise_std: float = 0.0  # m/s per step
    seed: int = 0

    def __post_init__(self):
        if self.comfortable_speed < 0 or self.time_constant <= 0 or self.noise_std < 0:
            raise ValueError("need comfortable_speed >= 0, time_constant > 0, noise_std >= 0")
        if not 0.0 <= self.heading_compliance <= 1.0:
            raise ValueError("heading_compliance must lie in [0, 1]")

    def to_dict(self):
        return asdict(self)


@dataclass
class RobotResponseModel:
    time_constant: float = 0.25  # s
    # diagonal of D, (m/s)/N. F^r points from the robot toward the person, so a
    # negative diagonal makes a backward pull slow the robot down.
    disturbance: tuple = (-0.02, -0.02)
    u_max: tuple = (1.5, 1.5, 1.0)
    noise_std: float = 0.0
    seed: int = 0

    def __post_init__(self):
        if self.time_constant <= 0 or self.noise_std < 0:
            raise ValueError("need time_constant > 0 and noise_std >= 0")
        self.disturbance = tuple(float(d) for d in self.disturbance)
        self.u_max = tuple(float(u) for u in self.u_max)

    @property
    def D(self) -> np.ndarray:
        d = np.asarray(self.disturbance, float)
        return np.diag(d) if d.ndim == 1 else d

    def clamp(self, u) -> np.ndarray:
        m = np.asarray(self.u_max, float)
        return np.clip(np.asarray(u, float), -m, m)

    def to_dict(self):
        return asdict(self)


@dataclass
class LeashModel:
    l_min: float = 0.8
    l_max: float = 1.5

    def geometry(self, xh, xr):
        """``(l, e_l)`` with ``e_l`` the unit vector from robot to human."""
        d = np.asarray(xh, float)[:2] - np.asarray(xr, float)[:2]
        l = float(np.hypot(d[0], d[1]))
        if l < 1e-12:
            return 0.0, np.array([1.0, 0.0])
        return l, d / l

    def realized_tension(self, commanded: float, l: float) -> float:
        """Commanded tension is realized instantly; a leash shorter than ``l_min`` is slack."""
        return float(commanded) if l >= self.l_min else 0.0

    def forces(self, commanded: float, xh, xr):
        """``(F, l, e_l, F_h, F_r)``; the human is pulled toward the robot."""
        l, e = self.geometry(xh, xr)
        F = self.realized_tension(commanded, l)
        Fh = -F * e
        return F, l, e, Fh, -Fh


def step_human(agent: HumanAgentModel, state: PlanarState, F_h, timebase: Timebase = Timebase(),
               rng: np.random.Generator | None = None) -> PlanarState:
    """Explicit Euler step: position moves with the current velocity, velocity
    relaxes toward the tension-driven desired velocity."""
    T = timebase.period_T
    F_h = np.asarray(F_h, float)[:2]
    v = state.v[:2]
    mag = float(np.hypot(*F_h))
    speed = min(max(agent.responsiveness * mag, 0.0), agent.comfortable_speed)
    desired = np.zeros(2)
    if speed > 0 and mag > 1e-12:
        pull = F_h / mag
        vs = float(np.hypot(*v))
        head = v / vs if vs > 1e-9 else pull
        c = agent.heading_compliance
        d = (1 - c) * head + c * pull
        dn = float(np.hypot(*d))
        desired = speed * (d / dn if dn > 1e-12 else pull)
    v_next = v + (desired - v) * (T / agent.time_constant)
    if agent.noise_std > 0 and rng is not None:
        v_next = v_next + agent.noise_std * rng.standard_normal(2)
    x_next = state.x[:2] + v * T
    vn = float(np.hypot(*v_next))
    theta = float(np.arctan2(v_next[1], v_next[0])) if vn > 1e-9 else state.theta
    return PlanarState(x=x_next, v=v_next, theta=theta)


def step_robot(model: RobotResponseModel, state: PlanarState, u, F_r, timebase: Timebase = Timebase(),
               rng: np.random.Generator | None = None) -> PlanarState:
    """``v += (clamp(u) - D F_r - v) T / tau``; yaw integrates the commanded rate."""
    T = timebase.period_T
    u = model.clamp(u)
    v = state.v[:2]
    target = u[:2] - model.D @ np.asarray(F_r, float)[:2]
    v_next = v + (target - v) * (T / model.time_constant)
    if model.noise_std > 0 and rng is not None:
        v_next = v_next + model.noise_std * rng.standard_normal(2)
    return PlanarState(x=state.x[:2] + v * T, v=v_next, theta=state.theta + u[2] * T)


def synthetic_subjects(n: int = 10, seed: int = 0, speed_range=(0.5, 1.2), resp_range=(0.05, 0.15),
                       tau_range=(0.3, 0.6), compliance_range=(0.3, 0.8), noise_std: float = 0.01) -> list:
    """Per-subject human models drawn uniformly from the given ranges."""
    rng = make_rng(seed, 401)
    out = []
    for i in range(n):
        out.append(HumanAgentModel(
            comfortable_speed=float(rng.uniform(*speed_range)),
            responsiveness=float(rng.uniform(*resp_range)),
            time_constant=float(rng.uniform(*tau_range)),
            heading_compliance=float(rng.uniform(*compliance_range)),
            noise_std=noise_std,
            seed=int(rng.integers(2**31)),
        ))
    return out
