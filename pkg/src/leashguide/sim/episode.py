"""Closed-loop guiding episode: predict, select waypoints, plan, apply, step the plants."""

from __future__ import annotations

import csv
import io
from dataclasses import dataclass, field

import numpy as np

from ..core import PlanarState, Timebase, make_rng
from ..mpc import (HumanPlanProblem, RobotPlanProblem, ShootingConfig, rollout_human, shift_commands,
                   shift_plan, solve_human_plan, solve_robot_plan)
from ..pathsmooth import select_waypoints
from ..worldmap import extract_obstacle_points
from .agents import HumanAgentModel, LeashModel, RobotResponseModel, step_human, step_robot
from .scenario import ScenarioSpec, plan_route

TRACE_COLUMNS = ["t", "xh_x", "xh_y", "vh_x", "vh_y", "xr_x", "xr_y", "vr_x", "vr_y",
                 "F", "l", "theta", "ur_x", "ur_y", "ur_w", "Jh", "Jr"]


@dataclass
class GuidanceConfig:
    horizon_h: int = 10
    horizon_r: int = 10
    w1: object = 400.0
    w2: object = 0.02
    w3: float = 0.02
    w4: float = 1.0
    w5: float = 5.0
    w6: object = 400.0
    w7: object = 0.05
    F_min: float = 2.0
    F_max: float = 20.0
    phi_F: float = 0.03
    phi_theta: float = 0.3
    r_obs: float = 0.3
    obstacle_range: float = 3.0
    F_init: float = 12.0
    goal_tol: float = 0.3
    human_solver: ShootingConfig = field(default_factory=lambda: ShootingConfig(population=48, iterations=4))
    robot_solver: ShootingConfig = field(default_factory=lambda: ShootingConfig(population=48, iterations=4))


@dataclass
class EpisodeTrace:
    rows: np.ndarray  # (n, len(TRACE_COLUMNS))
    outcome: str  # "goal" or "timeout"
    l_bounds: tuple

    def column(self, name: str) -> np.ndarray:
        return self.rows[:, TRACE_COLUMNS.index(name)]

    @property
    def human_speed(self):
        return np.hypot(self.column("vh_x"), self.column("vh_y"))

    @property
    def robot_speed(self):
        return np.hypot(self.column("vr_x"), self.column("vr_y"))

    def summary(self, settle_s: float = 3.0) -> dict:
        t = self.column("t")
        m = t >= settle_s
        if not m.any():
            m = np.ones(len(t), bool)
        l = self.column("l")[m]
        return {
            "outcome": self.outcome,
            "duration_s": float(t[-1]) if len(t) else 0.0,
            "human_speed_mean": float(self.human_speed[m].mean()),
            "robot_speed_mean": float(self.robot_speed[m].mean()),
            "separation_mean": float(l.mean()),
            "separation_std": float(l.std()),
            "separation_min": float(l.min()),
            "separation_max": float(l.max()),
        }

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(TRACE_COLUMNS)
        for r in self.rows:
            w.writerow([repr(float(v)) for v in r])
        return buf.getvalue()


@dataclass
class PlanStep:
    waypoints: np.ndarray
    human: object  # HumanPlanSolution
    robot: object  # RobotPlanSolution
    s_h: float
    speeds: np.ndarray


def plan_step(path, hmp, rdm, xh, vh, xr, vr, h_rows, r_rows, leash_state, s_hint, obstacles,
              leash: LeashModel, robot: RobotResponseModel, cfg: GuidanceConfig, T: float,
              hsolver: ShootingConfig, rsolver: ShootingConfig, seed: int, warm_h=None, warm_r=None) -> PlanStep:
    """One receding-horizon update: speed forecast, waypoints, human plan, robot plan.

    ``h_rows``/``r_rows`` hold at least ``W - 1`` past feature rows;
    ``leash_state`` is ``(F, angle of F^h, l, theta)``.
    """
    F_now, angle_now, l_now, theta_now = leash_state
    Wh, Wr = hmp.spec.window, rdm.spec.window
    Mh, Mr = cfg.horizon_h, cfg.horizon_r
    xh, vh, xr, vr = (np.asarray(a, float)[:2] for a in (xh, vh, xr, vr))
    # speed forecast with the current tension held
    F_vec = F_now * np.array([np.cos(angle_now), np.sin(angle_now)])
    win_h = np.array(list(h_rows[-(Wh - 1):]) + [np.array([*vh, *F_vec])]) if Wh > 1 \
        else np.array([[*vh, *F_vec]])
    xs_h = xh + vh * T
    pred = rollout_human(hmp, win_h, np.tile(F_vec, (Mh, 1)), xs_h, T).velocities
    speeds = np.hypot(pred[:, 0], pred[:, 1])
    s_h = path.project(xs_h, s_hint=s_hint, window=2.0)
    s0 = min(s_h + T * speeds[0], path.total_length)
    wp = select_waypoints(path, s0, speeds[1:], Mh, Timebase(T)).points[:, :2]
    near = obstacles[np.linalg.norm(obstacles[:, :2] - xh, axis=1) < cfg.obstacle_range][:, :2] \
        if len(obstacles) else np.zeros((0, 2))
    hp = HumanPlanProblem(
        waypoints=wp, history=win_h, x_start=xs_h, period=T, F_now=F_now, angle_now=angle_now,
        l_now=l_now, theta_now=theta_now, w1=cfg.w1, w2=cfg.w2, w3=cfg.w3, w4=cfg.w4, w5=cfg.w5,
        F_min=cfg.F_min, F_max=cfg.F_max, l_min=leash.l_min, l_max=leash.l_max,
        phi_F=cfg.phi_F, phi_theta=cfg.phi_theta, obstacles=near, r_obs=cfg.r_obs)
    hsol = solve_human_plan(hp, hmp, ShootingConfig(**{**hsolver.__dict__, "seed": seed}), warm_h)
    targets = _pad(hsol.robot_targets, Mr)
    F_fore = _pad(-hsol.F, Mr)
    u_prev = r_rows[-1][2:5] if len(r_rows) else np.zeros(3)
    last_r = np.array([*vr, *u_prev, *F_fore[0]])
    win_r = np.array(list(r_rows[-(Wr - 1):]) + [last_r]) if Wr > 1 else last_r[None]
    rp = RobotPlanProblem(targets=targets, history=win_r, x_start=xr + vr * T, period=T,
                          F_forecast=F_fore, w6=cfg.w6, w7=cfg.w7, u_max=robot.u_max)
    rsol = solve_robot_plan(rp, rdm, ShootingConfig(**{**rsolver.__dict__, "seed": seed + 3}), warm_r)
    return PlanStep(wp, hsol, rsol, s_h, speeds)


def _pad(a, M):
    a = np.asarray(a, float)[:M]
    if len(a) < M:
        a = np.vstack([a, np.repeat(a[-1:], M - len(a), 0)])
    return a


def run_guided_episode(scenario: ScenarioSpec, hmp, rdm, agent: HumanAgentModel,
                       config: GuidanceConfig = GuidanceConfig(), timebase: Timebase = Timebase(),
                       seed: int | None = None, max_steps: int | None = None) -> EpisodeTrace:
    """Guide ``agent`` from ``scenario.start`` to ``scenario.goal``.

    Raises ``NoPath`` when the goal is unreachable; running out of time is
    reported through ``outcome``.
    """
    T = timebase.period_T
    cfg = config
    seed = scenario.seed if seed is None else seed
    leash: LeashModel = scenario.leash
    robot: RobotResponseModel = scenario.robot
    grid = scenario.grid()
    path = plan_route(grid, [np.asarray(scenario.start, float), np.asarray(scenario.goal, float)],
                      scenario.inflate, scenario.angle_threshold)
    obstacles = extract_obstacle_points(grid)
    goal = np.asarray(scenario.goal, float)
    Wh, Wr = hmp.spec.window, rdm.spec.window
    Mh, Mr = cfg.horizon_h, cfg.horizon_r
    hn = make_rng(agent.seed, seed, 601)
    rn = make_rng(robot.seed, seed, 602)
    hsolver = ShootingConfig(**{**cfg.human_solver.__dict__, "seed": seed})
    rsolver = ShootingConfig(**{**cfg.robot_solver.__dict__, "seed": seed + 1})

    xh0 = path.point_at(0.0)[:2]
    human = PlanarState(x=xh0, v=np.zeros(2), theta=path.heading_at(0.0))
    l0 = scenario.leash_nominal
    xr0 = path.point_at(min(l0, path.total_length))[:2]
    if np.linalg.norm(xr0 - xh0) < 1e-9:
        xr0 = xh0 + l0 * np.array([np.cos(human.theta), np.sin(human.theta)])
    bot = PlanarState(x=xr0, v=np.zeros(2), theta=human.theta)
    l_now, e_l = leash.geometry(xh0, xr0)
    theta_now = float(np.arctan2(-e_l[1], -e_l[0]))
    F_now, angle_now = cfg.F_init, theta_now
    l_now = float(np.clip(l_now, leash.l_min, leash.l_max))

    # past rows as if the pair had been standing still with the leash tensioned
    Fh0 = F_now * np.array([np.cos(angle_now), np.sin(angle_now)])
    h_rows = [np.array([0.0, 0.0, *Fh0])] * (Wh - 1)
    r_rows = [np.array([0.0, 0.0, 0.0, 0.0, 0.0, *(-Fh0)])] * (Wr - 1)
    warm_h = warm_r = None
    s_h = 0.0
    n_max = int(round(scenario.episode_s / T)) if max_steps is None else max_steps
    out = []
    outcome = "timeout"
    for k in range(n_max):
        xh, vh = human.x[:2], human.v[:2]
        xr, vr = bot.x[:2], bot.v[:2]
        step = plan_step(path, hmp, rdm, xh, vh, xr, vr, h_rows, r_rows, (F_now, angle_now, l_now, theta_now),
                         s_h, obstacles, leash, robot, cfg, T, hsolver, rsolver, seed + 7 * k, warm_h, warm_r)
        hsol, rsol, s_h = step.human, step.robot, step.s_h
        u = rsol.u[0]

        F_cmd = float(hsol.magnitude[0])
        F, l, e, Fh, Fr = leash.forces(F_cmd, xh, xr)
        theta_geo = float(np.arctan2(-e[1], -e[0]))
        out.append([k * T, *xh, *vh, *xr, *vr, F, l, theta_geo, *u, hsol.cost, rsol.cost])
        h_rows.append(np.array([*vh, *Fh]))
        r_rows.append(np.array([*vr, *u, *Fr]))
        h_rows, r_rows = h_rows[-Wh:], r_rows[-Wr:]
        human = step_human(agent, human, Fh, timebase, hn if agent.noise_std > 0 else None)
        bot = step_robot(robot, bot, u, Fr, timebase, rn if robot.noise_std > 0 else None)
        F_now, angle_now = F_cmd, float(hsol.angle[0])
        l_now, theta_now = float(hsol.l[0]), float(hsol.theta[0])
        warm_h, warm_r = shift_plan(hsol.z, Mh), shift_commands(rsol.z, Mr)
        if np.linalg.norm(human.x[:2] - goal) < cfg.goal_tol:
            outcome = "goal"
            break
    return EpisodeTrace(np.array(out), outcome, (leash.l_min, leash.l_max))
