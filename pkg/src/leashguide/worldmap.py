"""Occupancy grids and 8-connected Dijkstra planning.

Cell ``(row, col)``: row 0 is the top line of a map file. World ``y`` grows
upward, so row ``r`` has its center at ``y = (height - 1 - r + 0.5) * res``
above the origin. Column ``c`` has its center at ``x = (c + 0.5) * res``.
"""

from __future__ import annotations

import heapq
import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np

SQRT2 = math.sqrt(2.0)
NEIGHBORS = [(-1, -1), (-1, 0), (-1, 1), (0, -1), (0, 1), (1, -1), (1, 0), (1, 1)]


class PlanningError(Exception):
    pass


class NoPath(PlanningError):
    pass


class OutOfBounds(PlanningError):
    pass


class OccupiedEndpoint(PlanningError):
    pass


@dataclass(frozen=True)
class GridMap:
    occupancy: np.ndarray  # (height, width) bool, row 0 = top
    resolution: float = 1.0
    origin: tuple = (0.0, 0.0)

    def __post_init__(self):
        occ = np.asarray(self.occupancy, dtype=bool)
        if occ.ndim != 2 or occ.shape[0] < 1 or occ.shape[1] < 1:
            raise ValueError("occupancy must be a non-empty 2-D array")
        if not self.resolution > 0:
            raise ValueError("resolution must be positive")
        occ = occ.copy()
        occ.setflags(write=False)
        object.__setattr__(self, "occupancy", occ)

    @property
    def height(self) -> int:
        return self.occupancy.shape[0]

    @property
    def width(self) -> int:
        return self.occupancy.shape[1]

    def in_bounds(self, cell) -> bool:
        r, c = cell
        return 0 <= r < self.height and 0 <= c < self.width

    def is_free(self, cell) -> bool:
        return self.in_bounds(cell) and not self.occupancy[cell[0], cell[1]]

    def cell_center(self, cell) -> np.ndarray:
        r, c = cell
        x = self.origin[0] + (c + 0.5) * self.resolution
        y = self.origin[1] + (self.height - 1 - r + 0.5) * self.resolution
        return np.array([x, y, 0.0])

    def world_to_cell(self, p) -> tuple[int, int]:
        c = int(math.floor((p[0] - self.origin[0]) / self.resolution))
        rr = int(math.floor((p[1] - self.origin[1]) / self.resolution))
        return (self.height - 1 - rr, c)

    def occupied_cells(self) -> list[tuple[int, int]]:
        rows, cols = np.nonzero(self.occupancy)
        return list(zip(rows.tolist(), cols.tolist()))


@dataclass(frozen=True)
class DiscretePath:
    cells: list
    world_points: np.ndarray
    cost: float

    def __len__(self):
        return len(self.cells)


def parse_map(text: str) -> GridMap:
    lines = [ln.rstrip("\r") for ln in text.splitlines()]
    lines = [ln for ln in lines if ln.strip()]
    if not lines:
        raise ValueError("empty map file")
    head = lines[0].split()
    if len(head) != 3:
        raise ValueError("map header must be 'width height resolution'")
    width, height, res = int(head[0]), int(head[1]), float(head[2])
    rows = lines[1:]
    if len(rows) != height:
        raise ValueError(f"map declares {height} rows, found {len(rows)}")
    occ = np.zeros((height, width), dtype=bool)
    for r, row in enumerate(rows):
        row = row.strip()
        if len(row) != width:
            raise ValueError(f"map row {r} has {len(row)} cells, expected {width}")
        for c, ch in enumerate(row):
            if ch == "#":
                occ[r, c] = True
            elif ch != ".":
                raise ValueError(f"unexpected map character {ch!r} at row {r}")
    return GridMap(occ, res)


def load_map(path) -> GridMap:
    return parse_map(Path(path).read_text())


def format_map(grid: GridMap) -> str:
    out = [f"{grid.width} {grid.height} {grid.resolution:g}"]
    for row in grid.occupancy:
        out.append("".join("#" if v else "." for v in row))
    return "\n".join(out) + "\n"


def _endpoint(grid: GridMap, p, name: str):
    cell = grid.world_to_cell(p)
    if not grid.in_bounds(cell):
        raise OutOfBounds(f"{name} {tuple(np.round(p[:2], 3))} lies outside the map")
    if grid.occupancy[cell]:
        raise OccupiedEndpoint(f"{name} {tuple(np.round(p[:2], 3))} lies in an occupied cell")
    return cell


def plan_cells(grid: GridMap, start: tuple, goal: tuple) -> tuple[list, float]:
    """Dijkstra over cells; ties resolved by lexicographic cell order."""
    if start == goal:
        return [start], 0.0
    occ = grid.occupancy
    h, w = occ.shape
    dist = {start: 0.0}
    parent = {}
    heap = [(0.0, start)]
    done = set()
    while heap:
        d, cell = heapq.heappop(heap)
        if cell in done:
            continue
        done.add(cell)
        if cell == goal:
            break
        r, c = cell
        for dr, dc in NEIGHBORS:
            nr, nc = r + dr, c + dc
            if not (0 <= nr < h and 0 <= nc < w) or occ[nr, nc]:
                continue
            nb = (nr, nc)
            if nb in done:
                continue
            nd = d + (SQRT2 if dr and dc else 1.0)
            old = dist.get(nb)
            # strict improvement, or an equal-cost route through a smaller parent
            if old is None or nd < old - 1e-12 or (abs(nd - old) <= 1e-12 and cell < parent[nb]):
                dist[nb] = nd
                parent[nb] = cell
                heapq.heappush(heap, (nd, nb))
    if goal not in done:
        raise NoPath(f"goal cell {goal} is unreachable from {start}")
    cells = [goal]
    while cells[-1] != start:
        cells.append(parent[cells[-1]])
    cells.reverse()
    return cells, dist[goal]


def plan_dijkstra(grid: GridMap, start, goal) -> DiscretePath:
    s = _endpoint(grid, start, "start")
    g = _endpoint(grid, goal, "goal")
    cells, cost = plan_cells(grid, s, g)
    pts = np.array([grid.cell_center(c) for c in cells])
    return DiscretePath(cells, pts, cost)


def inflate_obstacles(grid: GridMap, radius: float) -> GridMap:
    """Occupy every cell whose center lies within ``radius`` of an occupied center."""
    if radius < 0:
        raise ValueError("radius must be >= 0")
    k = int(math.floor(radius / grid.resolution + 1e-12))
    if k == 0:
        return grid
    occ = grid.occupancy
    out = occ.copy()
    h, w = occ.shape
    for dr in range(-k, k + 1):
        for dc in range(-k, k + 1):
            if (dr * dr + dc * dc) * grid.resolution**2 > radius**2 + 1e-12:
                continue
            if abs(dr) >= h or abs(dc) >= w:
                continue  # shifted entirely off the map
            src = occ[max(0, -dr):h - max(0, dr), max(0, -dc):w - max(0, dc)]
            out[max(0, dr):h - max(0, -dr), max(0, dc):w - max(0, -dc)] |= src
    return GridMap(out, grid.resolution, grid.origin)


def extract_obstacle_points(grid: GridMap) -> np.ndarray:
    """Centers of occupied cells that touch at least one free 8-neighbor."""
    occ = grid.occupancy
    h, w = occ.shape
    free = ~occ
    padded = np.zeros((h + 2, w + 2), dtype=bool)
    padded[1:-1, 1:-1] = free
    touch = np.zeros_like(occ)
    for dr, dc in NEIGHBORS:
        touch |= padded[1 + dr:1 + dr + h, 1 + dc:1 + dc + w]
    rows, cols = np.nonzero(occ & touch)
    if rows.size == 0:
        return np.zeros((0, 3))
    return np.array([grid.cell_center((r, c)) for r, c in zip(rows, cols)])


def segment_cells(grid: GridMap, a, b) -> list[tuple[int, int]]:
    """Cells whose interior the segment a->b passes through, in order.

    Crossings of grid lines split the segment into pieces; each piece lies in
    one cell, identified by its midpoint. Touching a cell only at a vertex or
    along an edge does not count.
    """
    a = np.asarray(a[:2], dtype=float)
    b = np.asarray(b[:2], dtype=float)
    res = grid.resolution
    ts = [0.0, 1.0]
    for axis in (0, 1):
        o = grid.origin[axis]
        lo, hi = sorted((a[axis], b[axis]))
        d = b[axis] - a[axis]
        if abs(d) < 1e-15:
            continue
        k0 = int(math.floor((lo - o) / res)) + 1
        k1 = int(math.ceil((hi - o) / res)) - 1
        for k in range(k0, k1 + 1):
            t = (o + k * res - a[axis]) / d
            if 0.0 < t < 1.0:
                ts.append(t)
    ts = sorted(set(ts))
    cells = []
    for t0, t1 in zip(ts[:-1], ts[1:]):
        if t1 - t0 < 1e-12:
            continue
        m = a + 0.5 * (t0 + t1) * (b - a)
        cell = grid.world_to_cell(m)
        if not cells or cells[-1] != cell:
            cells.append(cell)
    if not cells:
        cells.append(grid.world_to_cell(a))
    return cells


def segment_is_free(grid: GridMap, a, b) -> bool:
    """True when the straight segment a->b crosses no occupied cell interior."""
    for cell in segment_cells(grid, a, b):
        if not grid.in_bounds(cell) or grid.occupancy[cell]:
            return False
    return True
