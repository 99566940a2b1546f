"""Scenario description: map, course, agents and timing, stored as JSON."""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from ..pathsmooth import AnalyticPath, smooth_path
from ..worldmap import DiscretePath, GridMap, format_map, inflate_obstacles, load_map, parse_map, plan_dijkstra
from .agents import HumanAgentModel, LeashModel, RobotResponseModel, synthetic_subjects


class ScenarioError(ValueError):
    pass


def walled_map(width_m: float, height_m: float, resolution: float = 0.1, blocks=()) -> GridMap:
    """Rectangular arena with a one-cell wall and optional solid boxes ``(x0, y0, x1, y1)``."""
    w, h = int(round(width_m / resolution)), int(round(height_m / resolution))
    occ = np.zeros((h, w), bool)
    occ[0, :] = occ[-1, :] = occ[:, 0] = occ[:, -1] = True
    for x0, y0, x1, y1 in blocks:
        c0, c1 = int(np.floor(x0 / resolution)), int(np.ceil(x1 / resolution))
        # row 0 is the top of the map
        r0, r1 = h - int(np.ceil(y1 / resolution)), h - int(np.floor(y0 / resolution))
        occ[max(r0, 0):min(r1, h), max(c0, 0):min(c1, w)] = True
    return GridMap(occ, resolution)


BUILTIN_MAPS = {
    "arena": lambda: walled_map(14.0, 10.0, 0.1, blocks=[(4.0, 3.5, 10.0, 6.5)]),
    "corridor": lambda: walled_map(14.0, 4.0, 0.1),
}


@dataclass
class ScenarioSpec:
    map_ref: dict = field(default_factory=lambda: {"builtin": "corridor"})
    start: tuple = (2.0, 2.0)
    goal: tuple = (12.0, 2.0)
    course: list = field(default_factory=lambda: [[2.0, 2.0], [12.0, 2.0], [12.0, 8.0], [2.0, 8.0]])
    course_map_ref: dict = field(default_factory=lambda: {"builtin": "arena"})
    subjects: list = field(default_factory=list)  # HumanAgentModel per subject
    robot: RobotResponseModel = field(default_factory=RobotResponseModel)
    leash: LeashModel = field(default_factory=LeashModel)
    leash_nominal: float = 1.1
    inflate: float = 0.3
    angle_threshold: float = 0.05  # turning-angle pruning of the route, rad
    episode_s: float = 60.0
    session_s: float = 120.0
    seed: int = 0
    base_dir: str = "."

    def __post_init__(self):
        if self.episode_s <= 0 or self.session_s <= 0:
            raise ScenarioError("episode_s and session_s must be positive")
        if not self.leash.l_min <= self.leash_nominal <= self.leash.l_max:
            raise ScenarioError("leash_nominal must lie within [l_min, l_max]")
        if len(self.course) < 2:
            raise ScenarioError("course needs at least two waypoints")

    # maps -------------------------------------------------------------------
    def _resolve(self, ref: dict) -> GridMap:
        if "builtin" in ref:
            if ref["builtin"] not in BUILTIN_MAPS:
                raise ScenarioError(f"unknown builtin map {ref['builtin']!r}")
            return BUILTIN_MAPS[ref["builtin"]]()
        if "file" in ref:
            p = Path(self.base_dir) / ref["file"]
            if not p.exists():
                raise ScenarioError(f"map file not found: {p}")
            return load_map(p)
        if "text" in ref:
            return parse_map(ref["text"])
        raise ScenarioError("map reference needs one of 'builtin', 'file', 'text'")

    def grid(self) -> GridMap:
        return self._resolve(self.map_ref)

    def course_grid(self) -> GridMap:
        return self._resolve(self.course_map_ref)

    # serialization ----------------------------------------------------------
    def to_dict(self) -> dict:
        return {
            "map": self.map_ref, "start": list(self.start), "goal": list(self.goal),
            "course": [list(p) for p in self.course], "course_map": self.course_map_ref,
            "subjects": [s.to_dict() for s in self.subjects], "robot": self.robot.to_dict(),
            "leash": {"l_min": self.leash.l_min, "l_max": self.leash.l_max, "nominal": self.leash_nominal},
            "inflate": self.inflate, "angle_threshold": self.angle_threshold,
            "episode_s": self.episode_s, "session_s": self.session_s,
            "seed": self.seed,
        }

    @classmethod
    def from_dict(cls, d: dict, base_dir: str = ".") -> "ScenarioSpec":
        known = {"map", "start", "goal", "course", "course_map", "subjects", "robot", "leash",
                 "inflate", "angle_threshold", "episode_s", "session_s", "seed"}
        extra = set(d) - known
        if extra:
            raise ScenarioError(f"unknown scenario field(s): {', '.join(sorted(extra))}")
        kw = {"base_dir": base_dir}
        try:
            if "map" in d:
                kw["map_ref"] = dict(d["map"])
            if "course_map" in d:
                kw["course_map_ref"] = dict(d["course_map"])
            for k in ("start", "goal"):
                if k in d:
                    v = [float(x) for x in d[k]]
                    if len(v) != 2:
                        raise ScenarioError(f"field {k!r} must have two coordinates")
                    kw[k] = tuple(v)
            if "course" in d:
                kw["course"] = [[float(a), float(b)] for a, b in d["course"]]
            if "subjects" in d:
                subj = d["subjects"]
                if isinstance(subj, dict):
                    kw["subjects"] = synthetic_subjects(**subj)
                else:
                    kw["subjects"] = [HumanAgentModel(**s) for s in subj]
            if "robot" in d:
                kw["robot"] = RobotResponseModel(**d["robot"])
            if "leash" in d:
                lz = dict(d["leash"])
                nominal = lz.pop("nominal", None)
                kw["leash"] = LeashModel(**lz)
                if nominal is not None:
                    kw["leash_nominal"] = float(nominal)
            for k in ("inflate", "angle_threshold", "episode_s", "session_s"):
                if k in d:
                    kw[k] = float(d[k])
            if "seed" in d:
                kw["seed"] = int(d["seed"])
        except (TypeError, ValueError) as exc:
            if isinstance(exc, ScenarioError):
                raise
            raise ScenarioError(f"invalid scenario: {exc}") from exc
        return cls(**kw)

    @classmethod
    def load(cls, path) -> "ScenarioSpec":
        path = Path(path)
        try:
            d = json.loads(path.read_text())
        except json.JSONDecodeError as exc:
            raise ScenarioError(f"{path}: {exc}") from exc
        return cls.from_dict(d, base_dir=str(path.parent))

    def save(self, path) -> None:
        Path(path).write_text(json.dumps(self.to_dict(), indent=2, sort_keys=True) + "\n")


def plan_route(grid: GridMap, points, inflate: float = 0.3, angle_threshold: float = 0.05) -> AnalyticPath:
    """Dijkstra leg by leg on the inflated map, then prune and spline the whole route."""
    g = inflate_obstacles(grid, inflate) if inflate > 0 else grid
    cells, world, cost = [], [], 0.0
    legs = {}
    for a, b in zip(points[:-1], points[1:]):
        key = (tuple(np.round(a, 9)), tuple(np.round(b, 9)))
        if key not in legs:
            legs[key] = plan_dijkstra(g, a, b)
        leg = legs[key]
        skip = 1 if cells else 0
        cells += list(leg.cells)[skip:]
        world += list(leg.world_points)[skip:]
        cost += leg.cost
    world = np.array(world, float)
    # the route starts and ends at the exact requested points, not at cell centers
    world[0, :2] = np.asarray(points[0], float)[:2]
    world[-1, :2] = np.asarray(points[-1], float)[:2]
    return smooth_path(DiscretePath(cells, world, cost), g, angle_threshold)


__all__ = ["BUILTIN_MAPS", "ScenarioError", "ScenarioSpec", "format_map", "plan_route", "walled_map"]
