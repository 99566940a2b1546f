import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from leashguide.core import Timebase
from leashguide.pathsmooth import (AnalyticPath, lops_prune, select_waypoints, smooth_path, spline_interpolate,
                                   turning_angle, wrps_prune)
from leashguide.worldmap import DiscretePath, GridMap, plan_dijkstra, segment_is_free

from oracles import natural_spline_polyline, polyline_length


def discrete(grid, cells):
    return DiscretePath(list(cells), np.array([grid.cell_center(c) for c in cells]), 0.0)


def quarter_circle(n=1000):
    a = np.linspace(0.0, math.pi / 2, n)
    return AnalyticPath(np.column_stack([np.cos(a), np.sin(a)]))


class TestLops:
    def test_straight_corridor(self):
        g = GridMap(np.zeros((1, 10), bool))
        kept = lops_prune(discrete(g, [(0, c) for c in range(10)]), g)
        assert len(kept) == 2

    def test_l_shape_around_corner(self):
        occ = np.zeros((4, 4), bool)
        occ[1:, 1:] = True  # free cells form an L along the top row and left column
        g = GridMap(occ)
        cells = [(3, 0), (2, 0), (1, 0), (0, 0), (0, 1), (0, 2), (0, 3)]
        kept = lops_prune(discrete(g, cells), g)
        assert len(kept) == 3
        np.testing.assert_allclose(kept[1], g.cell_center((0, 0)))
        for a, b in zip(kept[:-1], kept[1:]):
            assert segment_is_free(g, a, b)

    def test_two_points_unchanged(self):
        g = GridMap(np.zeros((2, 2), bool))
        p = discrete(g, [(0, 0), (1, 1)])
        np.testing.assert_array_equal(lops_prune(p, g), p.world_points)

    @given(st.integers(0, 2 ** 30))
    def test_kept_segments_collision_free(self, seed):
        rng = np.random.default_rng(seed)
        occ = rng.random((8, 8)) < 0.25
        occ[0, 0] = occ[7, 7] = False
        g = GridMap(occ)
        try:
            path = plan_dijkstra(g, g.cell_center((7, 0)), g.cell_center((0, 7)))
        except Exception:
            return
        kept = lops_prune(path, g)
        np.testing.assert_array_equal(kept[0], path.world_points[0])
        np.testing.assert_array_equal(kept[-1], path.world_points[-1])
        for a, b in zip(kept[:-1], kept[1:]):
            assert segment_is_free(g, a, b)
        # pruning never moves a retained point
        assert all(any(np.array_equal(k, w) for w in path.world_points) for k in kept)


class TestWrps:
    def test_collinear_middle_removed(self):
        assert len(wrps_prune([[0, 0], [1, 0], [2, 0]], 0.05)) == 2

    def test_right_angle_kept(self):
        assert len(wrps_prune([[0, 0], [1, 0], [1, 1]], 0.05)) == 3

    def test_small_zigzag_reduces_to_endpoints(self):
        # each leg deviates 0.005 rad from the x axis, so turning angles are 0.01 rad
        xs = np.arange(8.0)
        ys = np.where(np.arange(8) % 2, math.tan(0.005), 0.0)
        pts = np.column_stack([xs, ys])
        angles = [turning_angle(*pts[i - 1:i + 2]) for i in range(1, 7)]
        np.testing.assert_allclose(angles, 0.01, rtol=1e-6)
        out = wrps_prune(pts, 0.05)
        np.testing.assert_array_equal(out, pts[[0, -1]])

    def test_rejects_single_point(self):
        with pytest.raises(ValueError):
            wrps_prune([[0, 0]], 0.05)

    @given(st.lists(st.tuples(st.floats(-10, 10), st.floats(-10, 10)), min_size=2, max_size=12),
           st.floats(0, 3))
    def test_endpoints_and_order_kept(self, pts, thr):
        pts = np.array(pts)
        out = wrps_prune(pts, thr)
        np.testing.assert_array_equal(out[0], pts[0])
        np.testing.assert_array_equal(out[-1], pts[-1])
        it = iter(map(tuple, pts))
        assert all(any(q == o for q in it) for o in map(tuple, out))  # out is a subsequence


class TestSpline:
    def test_straight_line(self):
        p = spline_interpolate([[0, 0], [1, 0], [2, 0]])
        assert p.total_length == pytest.approx(2.0, abs=1e-9)
        np.testing.assert_allclose(p.point_at(1.3), [1.3, 0, 0], atol=1e-9)

    def test_two_points(self):
        p = spline_interpolate([[0, 0], [3, 4]])
        assert p.total_length == pytest.approx(5.0, abs=1e-9)

    def test_tent_length_against_independent_spline(self):
        pts = [[0, 0], [1, 1], [2, 0]]
        p = spline_interpolate(pts)
        ref = polyline_length(natural_spline_polyline(pts))
        assert p.total_length > 2 * math.sqrt(2) * (1 - 1e-9)
        assert p.total_length == pytest.approx(ref, abs=1e-6)

    def test_rejects_duplicates(self):
        with pytest.raises(ValueError):
            spline_interpolate([[0, 0], [0, 0], [1, 0]])

    @given(st.integers(0, 2 ** 30), st.integers(2, 7))
    def test_passes_through_control_points(self, seed, n):
        rng = np.random.default_rng(seed)
        pts = np.cumsum(rng.uniform(0.2, 1.0, (n, 2)) * rng.choice([-1, 1], (n, 2)), axis=0)
        p = AnalyticPath(pts)
        assert np.all(np.diff(p.arclength_table) > 0)
        for s, q in zip(p.arclength_table, pts):
            np.testing.assert_allclose(p.point_at(s)[:2], q, atol=1e-9)
        np.testing.assert_allclose(p.point_at(0.0)[:2], pts[0], atol=1e-6)
        np.testing.assert_allclose(p.point_at(p.total_length)[:2], pts[-1], atol=1e-6)

    @given(st.integers(0, 2 ** 30))
    def test_length_matches_independent_spline(self, seed):
        rng = np.random.default_rng(seed)
        pts = np.cumsum(rng.uniform(0.3, 1.0, (5, 2)), axis=0)
        ref = polyline_length(natural_spline_polyline(pts, 4000))
        assert AnalyticPath(pts).total_length == pytest.approx(ref, rel=1e-6)

    def test_arclength_parameterization(self):
        p = AnalyticPath([[0, 0], [1, 1], [2, 0], [3, 1]])
        s = np.linspace(0, p.total_length, 401)
        approx = polyline_length(p.point_at(s))
        assert approx == pytest.approx(p.total_length, rel=1e-4)
        steps = np.linalg.norm(np.diff(p.point_at(s), axis=0), axis=1)
        np.testing.assert_allclose(steps, s[1], rtol=1e-3)

    def test_csv_export(self, tmp_path):
        p = AnalyticPath([[0, 0], [1, 0]])
        p.to_csv(tmp_path / "path.csv", ds=0.25)
        lines = (tmp_path / "path.csv").read_text().splitlines()
        assert lines[0] == "s,x,y" and len(lines) == 6


class TestWaypoints:
    def test_straight_spacing(self):
        p = AnalyticPath([[0, 0], [10, 0]])
        wp = select_waypoints(p, 1.0, 1.0, 5, Timebase(0.02))
        np.testing.assert_allclose(wp.spacings, 0.02, atol=1e-12)
        assert wp.horizon == 5

    def test_standstill(self):
        p = AnalyticPath([[0, 0], [1, 1], [2, 0]])
        wp = select_waypoints(p, 0.7, 0.0, 4, Timebase())
        np.testing.assert_allclose(wp.points, np.tile(p.point_at(0.7), (4, 1)), atol=1e-12)

    def test_quarter_circle_chord(self):
        p = quarter_circle()
        assert p.total_length == pytest.approx(math.pi / 2, rel=1e-6)
        wp = select_waypoints(p, 0.0, 1.0, 15, Timebase(0.1))
        np.testing.assert_allclose(np.diff(wp.arclengths), 0.1, atol=1e-12)
        np.testing.assert_allclose(wp.spacings, 2 * math.sin(0.05), atol=1e-8)

    def test_clamps_at_end(self):
        p = AnalyticPath([[0, 0], [1, 0]])
        wp = select_waypoints(p, 0.9, 1.0, 6, Timebase(0.1))
        np.testing.assert_allclose(wp.points[-1], [1, 0, 0], atol=1e-9)
        assert wp.spacings[-1] == 0.0

    @pytest.mark.parametrize("args", [(0.0, -1.0, 3), (0.0, 1.0, 0), (5.0, 1.0, 3)])
    def test_rejects(self, args):
        p = AnalyticPath([[0, 0], [1, 0]])
        with pytest.raises(ValueError):
            select_waypoints(p, args[0], args[1], args[2], Timebase())

    @given(st.floats(0, 2), st.floats(0, 2), st.floats(0, 1))
    def test_faster_means_wider_spacing(self, v1, v2, frac):
        p = AnalyticPath([[0, 0], [1, 1], [2, 0], [3, 1]])
        lo, hi = sorted((v1, v2))
        s0 = frac * p.total_length
        a = select_waypoints(p, s0, lo, 8, Timebase(0.05))
        b = select_waypoints(p, s0, hi, 8, Timebase(0.05))
        assert np.all(np.diff(b.arclengths) >= np.diff(a.arclengths) - 1e-12)
        # chord spacing follows arc spacing up to curvature error
        for w in (a, b):
            np.testing.assert_allclose(w.spacings, np.linalg.norm(np.diff(w.points, axis=0), axis=1),
                                       atol=1e-12)
            assert np.all(w.spacings <= np.diff(w.arclengths) + 1e-9)
            assert np.all(np.diff(w.arclengths) - w.spacings <= (hi * 0.05) ** 3 * 10 + 1e-9)

    @given(st.floats(0, 1), st.floats(0.1, 2))
    def test_points_on_path(self, frac, v):
        p = AnalyticPath([[0, 0], [2, 1], [3, 3]])
        wp = select_waypoints(p, frac * p.total_length, v, 6, Timebase(0.1))
        for q, s in zip(wp.points, wp.arclengths):
            np.testing.assert_allclose(q, p.point_at(s), atol=1e-12)


def test_empty_map_route_close_to_straight_line():
    g = GridMap(np.zeros((40, 60), bool), 0.1)
    a, b = np.array([0.35, 0.45]), np.array([5.55, 3.35])
    path = smooth_path(plan_dijkstra(g, a, b), g)
    d = np.linalg.norm(g.cell_center(g.world_to_cell(b))[:2] - g.cell_center(g.world_to_cell(a))[:2])
    assert abs(path.total_length - d) <= 0.01 * d
