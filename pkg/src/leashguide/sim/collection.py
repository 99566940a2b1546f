"""Scripted data-collection runs that produce raw interaction logs.

``human_data``: a kinematic leader walks the course, staying one nominal
leash length ahead of the person, while the tension is redrawn from
``[F_lo, F_hi]`` every ``resample_s`` seconds.

``robot_data``: the robot plant walks at random constant commands while
random tension pulses of varying magnitude, duration and direction act on it.
"""

from __future__ import annotations

import numpy as np

from ..core import PlanarState, Timebase, make_rng
from ..predictors.data import InteractionLog
from .agents import HumanAgentModel, step_human, step_robot
from .scenario import ScenarioSpec, plan_route

MODES = ("human_data", "robot_data")


class Track:
    """Piecewise-linear view of a path sampled every 2 cm, for fast scripted motion."""

    def __init__(self, path):
        self.s, pts = path.dense_table()
        self.p = pts[:, :2]
        seg = np.diff(self.p, axis=0)
        self.heading = np.arctan2(seg[:, 1], seg[:, 0])
        self.total_length = float(self.s[-1])

    def _seg(self, s):
        return int(np.clip(np.searchsorted(self.s, s, side="right") - 1, 0, len(self.s) - 2))

    def point(self, s) -> np.ndarray:
        j = self._seg(s)
        w = (s - self.s[j]) / (self.s[j + 1] - self.s[j])
        return (1 - w) * self.p[j] + w * self.p[j + 1]

    def heading_at(self, s) -> float:
        return float(self.heading[self._seg(s)])

    def project(self, x, s_hint: float, window: float = 2.0) -> float:
        i0 = int(np.searchsorted(self.s, s_hint - window))
        i1 = int(np.searchsorted(self.s, s_hint + window))
        d = np.sum((self.p[i0:i1 + 1] - x) ** 2, axis=1)
        return float(self.s[i0 + int(np.argmin(d))])

    def point_ahead(self, s_from: float, x, dist: float, reach: float = 10.0) -> float:
        """Smallest ``s >= s_from`` with ``|point(s) - x| = dist`` (path end if none)."""
        x = np.asarray(x, float)[:2]
        i0 = self._seg(s_from) + 1
        i1 = int(np.searchsorted(self.s, s_from + reach))
        d = np.linalg.norm(self.p[i0:i1 + 1] - x, axis=1)
        hits = np.nonzero(d >= dist)[0]
        if len(hits) == 0:
            return self.total_length
        j = i0 + int(hits[0])
        a = self.point(s_from) if j == i0 else self.p[j - 1]
        sa = s_from if j == i0 else self.s[j - 1]
        if np.linalg.norm(a - x) >= dist:
            return float(sa)
        # solve |a + t (b - a) - x| = dist on the segment
        b = self.p[j]
        db, da = b - a, a - x
        qa, qb, qc = db @ db, 2 * da @ db, da @ da - dist * dist
        t = (-qb + np.sqrt(max(qb * qb - 4 * qa * qc, 0.0))) / (2 * qa)
        return float(sa + np.clip(t, 0.0, 1.0) * (self.s[j] - sa))


def _course_path(scenario: ScenarioSpec, duration_s: float, max_speed: float = 1.5):
    grid = scenario.course_grid()
    loop = [np.asarray(p, float) for p in scenario.course] + [np.asarray(scenario.course[0], float)]
    one = plan_route(grid, loop, scenario.inflate, scenario.angle_threshold)
    laps = int(np.ceil(duration_s * max_speed / max(one.total_length, 1e-6))) + 1
    pts = loop + loop[1:] * (laps - 1)
    return plan_route(grid, pts, scenario.inflate, scenario.angle_threshold)


def collect_human_data(scenario: ScenarioSpec, agent: HumanAgentModel, duration_s: float,
                       subject_id: str = "s0", seed: int = 0, timebase: Timebase = Timebase(),
                       F_range=(2.0, 20.0), resample_s: float = 10.0) -> InteractionLog:
    T = timebase.period_T
    n = int(round(duration_s / T))
    path = _course_path(scenario, duration_s)
    rng = make_rng(seed, 501)
    noise = make_rng(agent.seed, seed, 502)
    L = scenario.leash_nominal
    per = int(round(resample_s / T))

    track = Track(path)
    xh0 = track.point(0.0)
    human = PlanarState(x=xh0, v=np.zeros(2), theta=track.heading_at(0.0))
    s_h = 0.0
    s_r = track.point_ahead(0.0, xh0, L)
    xr = track.point(s_r)
    heading_r = track.heading_at(s_r)
    rows = {k: np.zeros((n, 3)) for k in ("xr", "ur", "el")}
    Fs, ls = np.zeros(n), np.zeros(n)
    F = 0.0
    for k in range(n):
        if k % per == 0:
            F = float(rng.uniform(*F_range))
        d = human.x[:2] - xr
        l = float(np.hypot(*d))
        e = d / l
        # the leader moves first so the logged command carries the robot to the next row
        s_h = track.project(human.x[:2], s_h)
        nxt_h = human.x[:2] + human.v[:2] * T
        s_r_next = track.point_ahead(max(s_r, s_h), nxt_h, L)
        xr_next = track.point(s_r_next)
        heading_next = track.heading_at(s_r_next)
        u = np.array([*(xr_next - xr) / T, np.angle(np.exp(1j * (heading_next - heading_r))) / T])
        rows["xr"][k, :2] = xr
        rows["ur"][k] = u
        rows["el"][k, :2] = e
        Fs[k], ls[k] = F, l
        human = step_human(agent, human, -F * e, timebase, noise)
        xr, s_r, heading_r = xr_next, s_r_next, heading_next
    t = np.arange(n) * T
    return InteractionLog(t=t, subject_id=subject_id, xr=rows["xr"], ur=rows["ur"], F=Fs, el=rows["el"], l=ls)


def collect_robot_data(scenario: ScenarioSpec, duration_s: float, subject_id: str = "robot", seed: int = 0,
                       timebase: Timebase = Timebase(), speed_range=(0.2, 1.2), hold_range=(2.0, 5.0),
                       F_range=(2.0, 20.0), pulse_range=(0.2, 1.5), gap_range=(0.3, 2.0)) -> InteractionLog:
    T = timebase.period_T
    n = int(round(duration_s / T))
    model = scenario.robot
    rng = make_rng(seed, 511)
    noise = make_rng(model.seed, seed, 512)
    L = scenario.leash_nominal
    state = PlanarState()
    u = np.zeros(3)
    cmd_left = 0
    F, e = 0.0, np.array([1.0, 0.0])
    pulse_left, gap_left = 0, int(round(rng.uniform(*gap_range) / T))
    out = {k: np.zeros((n, 3)) for k in ("xr", "ur", "el")}
    Fs = np.zeros(n)
    for k in range(n):
        if cmd_left <= 0:
            sp, ang = rng.uniform(*speed_range), rng.uniform(-np.pi, np.pi)
            u = np.array([sp * np.cos(ang), sp * np.sin(ang), rng.uniform(-0.3, 0.3)])
            cmd_left = int(round(rng.uniform(*hold_range) / T))
        if pulse_left <= 0 and gap_left <= 0:
            F = float(rng.uniform(*F_range))
            a = rng.uniform(-np.pi, np.pi)
            e = np.array([np.cos(a), np.sin(a)])
            pulse_left = int(round(rng.uniform(*pulse_range) / T))
            gap_left = int(round(rng.uniform(*gap_range) / T))
        if pulse_left <= 0:
            F = 0.0
            gap_left -= 1
        else:
            pulse_left -= 1
        out["xr"][k, :2] = state.x[:2]
        out["ur"][k] = u
        out["el"][k, :2] = e
        Fs[k] = F
        state = step_robot(model, state, u, F * e, timebase, noise)
        cmd_left -= 1
    return InteractionLog(t=np.arange(n) * T, subject_id=subject_id, xr=out["xr"], ur=out["ur"],
                          F=Fs, el=out["el"], l=np.full(n, L))


def run_collection_protocol(scenario: ScenarioSpec, mode: str, subject: int = 0,
                            duration_s: float | None = None, timebase: Timebase = Timebase(),
                            F_range=(2.0, 20.0), resample_s: float = 10.0) -> InteractionLog:
    """One log for ``scenario.subjects[subject]`` (human mode) or the robot plant."""
    if mode not in MODES:
        raise ValueError(f"mode must be one of {MODES}")
    dur = scenario.session_s if duration_s is None else duration_s
    seed = int(make_rng(scenario.seed, subject, 520).integers(2**31))
    if mode == "human_data":
        if not scenario.subjects:
            raise ValueError("no subjects configured")
        agent = scenario.subjects[subject]
        return collect_human_data(scenario, agent, dur, f"s{subject:02d}", seed, timebase, F_range, resample_s)
    return collect_robot_data(scenario, dur, f"r{subject:02d}", seed, timebase, F_range=F_range)
