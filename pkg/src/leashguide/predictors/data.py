"""Interaction logs and the windowed datasets built from them.

Sample ``k`` of a log uses window rows ``k-W .. k-1`` as input and the
velocity at row ``k`` as label; the rollout compares positions at rows
``k+1 .. k+K`` against ``x_k + T * sum(predicted velocities)``. A log of
length ``n`` therefore yields ``n - W - K`` samples.
"""

from __future__ import annotations

import csv
import warnings
from dataclasses import dataclass, field
from pathlib import Path
from typing import NamedTuple

import numpy as np

from ..core import Timebase, finite_difference_velocity, moving_average

LOG_COLUMNS = ["t", "subject_id", "xr_x", "xr_y", "ur_x", "ur_y", "ur_w", "F", "el_x", "el_y", "l"]

HUMAN_CHANNELS = ("v_x", "v_y", "F_x", "F_y")
ROBOT_CHANNELS = ("v_x", "v_y", "u_x", "u_y", "u_w", "F_x", "F_y")
FEEDBACK = (0, 1)
HUMAN_EXO = (2, 3)
ROBOT_EXO = (2, 3, 4, 5, 6)


@dataclass
class InteractionLog:
    """Raw 50 Hz records; derived channels are computed, never stored."""

    t: np.ndarray
    subject_id: str
    xr: np.ndarray  # (n, 3) robot position
    ur: np.ndarray  # (n, 3) command v_x, v_y, omega
    F: np.ndarray  # (n,) tension magnitude
    el: np.ndarray  # (n, 3) unit leash direction, robot -> human
    l: np.ndarray  # (n,) leash length

    def __post_init__(self):
        n = len(self.t)
        self.t = np.asarray(self.t, float)
        self.xr = _as3(self.xr, n)
        self.ur = np.asarray(self.ur, float).reshape(n, 3)
        self.F = np.asarray(self.F, float).reshape(n)
        self.el = _as3(self.el, n)
        self.l = np.asarray(self.l, float).reshape(n)

    def __len__(self):
        return len(self.t)

    @property
    def xh(self) -> np.ndarray:
        return self.xr + self.l[:, None] * self.el

    @property
    def Fh(self) -> np.ndarray:
        return -self.F[:, None] * self.el

    @property
    def Fr(self) -> np.ndarray:
        return self.F[:, None] * self.el

    def check(self, timebase: Timebase, l_bounds=None, tol: float = 1e-6):
        """Raise ValueError when the log breaks its invariants."""
        if len(self.t) > 1 and np.max(np.abs(np.diff(self.t) - timebase.period_T)) > tol:
            raise ValueError(f"log {self.subject_id}: timestep is not {timebase.period_T}")
        if np.any(np.abs(np.linalg.norm(self.el, axis=1) - 1.0) > 1e-9):
            raise ValueError(f"log {self.subject_id}: leash direction is not unit length")
        if np.any(self.F < 0):
            raise ValueError(f"log {self.subject_id}: negative tension")
        if l_bounds is not None:
            lo, hi = l_bounds
            if np.any(self.l < lo - tol) or np.any(self.l > hi + tol):
                raise ValueError(f"log {self.subject_id}: leash length outside [{lo}, {hi}]")


def _as3(a, n):
    a = np.asarray(a, float)
    if a.ndim == 2 and a.shape[1] == 2:
        a = np.column_stack([a, np.zeros(len(a))])
    return a.reshape(n, 3)


def _fmt(x) -> str:
    return repr(float(x))


def write_log(log: InteractionLog, path) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(LOG_COLUMNS)
        for i in range(len(log)):
            w.writerow([_fmt(log.t[i]), log.subject_id, _fmt(log.xr[i, 0]), _fmt(log.xr[i, 1]),
                        _fmt(log.ur[i, 0]), _fmt(log.ur[i, 1]), _fmt(log.ur[i, 2]), _fmt(log.F[i]),
                        _fmt(log.el[i, 0]), _fmt(log.el[i, 1]), _fmt(log.l[i])])


def read_log(path) -> InteractionLog:
    path = Path(path)
    with open(path, newline="") as fh:
        rows = list(csv.reader(fh))
    if not rows or rows[0] != LOG_COLUMNS:
        raise ValueError(f"{path}: header must be {','.join(LOG_COLUMNS)}")
    body = rows[1:]
    if not body:
        raise ValueError(f"{path}: no records")
    sid = body[0][1]
    num = np.array([[float(r[i]) for i in (0, 2, 3, 4, 5, 6, 7, 8, 9, 10)] for r in body])
    return InteractionLog(
        t=num[:, 0], subject_id=sid,
        xr=num[:, 1:3], ur=num[:, 3:6], F=num[:, 6], el=num[:, 7:9], l=num[:, 9],
    )


class Sample(NamedTuple):
    window: np.ndarray  # (W, C)
    label: np.ndarray  # (2,) velocity at the step after the window
    x_start: np.ndarray  # (2,)
    rollout_positions: np.ndarray  # (K, 2)


# typed aliases kept distinct for readability at call sites
HumanSample = Sample
RobotSample = Sample


@dataclass
class SequenceDataset:
    kind: str
    features: np.ndarray  # (N, C) all logs concatenated
    positions: np.ndarray  # (N, 2)
    sample_rows: np.ndarray  # (S,) global row k of each sample
    sample_log: np.ndarray  # (S,) log index of each sample
    log_subjects: list
    window: int
    rollout_k: int
    period: float
    exogenous: tuple
    feedback: tuple = FEEDBACK
    channel_names: tuple = field(default=())

    def __len__(self):
        return len(self.sample_rows)

    @property
    def n_logs(self) -> int:
        return len(self.log_subjects)

    @property
    def input_channels(self) -> int:
        return self.features.shape[1]

    def windows(self, idx=None) -> np.ndarray:
        rows = self.sample_rows if idx is None else self.sample_rows[idx]
        offs = np.arange(-self.window, 0)
        return self.features[rows[:, None] + offs[None, :]]

    def labels(self, idx=None) -> np.ndarray:
        rows = self.sample_rows if idx is None else self.sample_rows[idx]
        return self.features[rows][:, list(self.feedback)]

    def rollout_arrays(self, idx, K: int | None = None):
        """``(history, exo, x_start, x_true, teacher)`` for a K-step rollout."""
        K = self.rollout_k if K is None else K
        if K > self.rollout_k:
            raise ValueError(f"rollout of {K} steps exceeds the dataset's {self.rollout_k}")
        rows = self.sample_rows[idx]
        hist = self.windows(idx)
        steps = np.arange(K)
        exo = self.features[rows[:, None] - 1 + steps[None, :]][:, :, list(self.exogenous)]
        x_start = self.positions[rows]
        x_true = self.positions[rows[:, None] + 1 + steps[None, :]]
        teacher = self.features[rows[:, None] + steps[None, :-1]][:, :, list(self.feedback)]
        return hist, exo, x_start, x_true, teacher

    def __getitem__(self, i) -> Sample:
        h, _, xs, xt, _ = self.rollout_arrays(np.array([i]))
        return Sample(h[0], self.labels(np.array([i]))[0], xs[0], xt[0])

    def select_logs(self, log_ids) -> np.ndarray:
        """Indices of all samples belonging to the given logs."""
        return np.nonzero(np.isin(self.sample_log, np.asarray(list(log_ids))))[0]

    def subset(self, idx) -> "SequenceDataset":
        idx = np.asarray(idx)
        return SequenceDataset(self.kind, self.features, self.positions, self.sample_rows[idx],
                               self.sample_log[idx], self.log_subjects, self.window, self.rollout_k,
                               self.period, self.exogenous, self.feedback, self.channel_names)


def _assemble(kind, per_log, window, rollout_k, period, exo, names):
    feats, poss, rows, logs, subjects = [], [], [], [], []
    offset = 0
    for li, (sid, f, p) in enumerate(per_log):
        n = len(f)
        ks = np.arange(window, n - rollout_k)
        if len(ks) == 0:
            warnings.warn(f"log {sid!r} has {n} rows, fewer than window + rollout + 1; no samples")
        feats.append(f)
        poss.append(p)
        rows.append(ks + offset)
        logs.append(np.full(len(ks), li))
        subjects.append(sid)
        offset += n
    C = len(names)
    return SequenceDataset(
        kind=kind,
        features=np.concatenate(feats) if feats else np.zeros((0, C)),
        positions=np.concatenate(poss) if poss else np.zeros((0, 2)),
        sample_rows=np.concatenate(rows).astype(int) if rows else np.zeros(0, int),
        sample_log=np.concatenate(logs).astype(int) if logs else np.zeros(0, int),
        log_subjects=subjects, window=window, rollout_k=rollout_k, period=period,
        exogenous=exo, channel_names=names,
    )


def build_human_dataset(logs, W_h: int = 20, rollout_k: int = 10, timebase: Timebase = Timebase(),
                        smooth_window: int = 5) -> SequenceDataset:
    """Windows of human velocity and received tension.

    Per log: compose human positions from the robot position and leash,
    decompose the tension into the pull on the human, differentiate
    positions, then smooth velocity and force channels.
    """
    per_log = []
    for log in logs:
        xh = log.xh
        vh = moving_average(finite_difference_velocity(xh[:, :2], timebase), smooth_window) \
            if len(log) >= 2 else np.zeros((len(log), 2))
        fh = moving_average(log.Fh[:, :2], smooth_window)
        per_log.append((log.subject_id, np.column_stack([vh, fh]), xh[:, :2]))
    return _assemble("human", per_log, W_h, rollout_k, timebase.period_T, HUMAN_EXO, HUMAN_CHANNELS)


def build_robot_dataset(logs, W_r: int = 20, rollout_k: int = 10, timebase: Timebase = Timebase(),
                        smooth_window: int = 5) -> SequenceDataset:
    """Windows of robot velocity, command and tension felt by the robot."""
    per_log = []
    for log in logs:
        vr = moving_average(finite_difference_velocity(log.xr[:, :2], timebase), smooth_window) \
            if len(log) >= 2 else np.zeros((len(log), 2))
        fr = moving_average(log.Fr[:, :2], smooth_window)
        per_log.append((log.subject_id, np.column_stack([vr, log.ur, fr]), log.xr[:, :2]))
    return _assemble("robot", per_log, W_r, rollout_k, timebase.period_T, ROBOT_EXO, ROBOT_CHANNELS)


def dataset_from_arrays(kind: str, features_per_log, positions_per_log, window: int, rollout_k: int,
                        period: float, subjects=None) -> SequenceDataset:
    """Dataset straight from channel arrays, bypassing the log pipeline."""
    exo, names = (HUMAN_EXO, HUMAN_CHANNELS) if kind == "human" else (ROBOT_EXO, ROBOT_CHANNELS)
    subjects = subjects or [f"s{i}" for i in range(len(features_per_log))]
    per_log = [(s, np.asarray(f, float), np.asarray(p, float)[:, :2])
               for s, f, p in zip(subjects, features_per_log, positions_per_log)]
    return _assemble(kind, per_log, window, rollout_k, period, exo, names)
