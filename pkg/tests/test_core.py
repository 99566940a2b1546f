import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from leashguide.core import (PlanarState, TensionSample, Timebase, UnitVecYaw, compose_human_position,
                             decompose_tension, finite_difference_velocity, make_rng, moving_average,
                             wrap_angle)

angles = st.floats(-math.pi, math.pi, allow_nan=False)
mags = st.floats(0.0, 100.0, allow_nan=False)
coords = st.floats(-50.0, 50.0, allow_nan=False)


def unit_from(a):
    return np.array([math.cos(a), math.sin(a), 0.0])


class TestTension:
    def test_human_side_sign(self):
        s = TensionSample(10.0, [1.0, 0.0, 0.0])
        np.testing.assert_array_equal(decompose_tension(s, "human"), [-10.0, 0.0, 0.0])

    def test_robot_side_sign(self):
        s = TensionSample(10.0, [1.0, 0.0, 0.0])
        np.testing.assert_array_equal(decompose_tension(s, "robot"), [10.0, 0.0, 0.0])

    def test_zero_force(self):
        s = TensionSample(0.0, [0.6, 0.8, 0.0])
        np.testing.assert_array_equal(decompose_tension(s, "human"), [0.0, 0.0, 0.0])

    @pytest.mark.parametrize("mag,direction", [(-1.0, [1, 0, 0]), (float("nan"), [1, 0, 0]),
                                               (float("inf"), [1, 0, 0]), (1.0, [1, 1, 0]), (1.0, [0, 0, 0])])
    def test_rejects_invalid(self, mag, direction):
        with pytest.raises(ValueError):
            TensionSample(mag, direction)

    def test_rejects_unknown_side(self):
        with pytest.raises(ValueError):
            decompose_tension(TensionSample(1.0, [1, 0, 0]), "leash")

    @given(mags, angles)
    def test_reciprocity_and_norm(self, F, a):
        s = TensionSample(F, unit_from(a))
        h, r = decompose_tension(s, "human"), decompose_tension(s, "robot")
        np.testing.assert_array_equal(h, -r)
        assert abs(np.linalg.norm(h) - F) <= 1e-9 * max(1.0, F)


class TestComposition:
    @pytest.mark.parametrize("xr,l,e,expected", [
        ((0, 0, 0), 1.5, (0, 1, 0), (0, 1.5, 0)),
        ((2, 2, 0), 2.0, (-1, 0, 0), (0, 2, 0)),
    ])
    def test_axis_aligned(self, xr, l, e, expected):
        np.testing.assert_allclose(compose_human_position(xr, l, e), expected, atol=1e-15)

    def test_diagonal_matches_vector_addition(self):
        e = np.array([math.sqrt(2) / 2, math.sqrt(2) / 2, 0.0])
        got = compose_human_position((1, 1, 0), math.sqrt(2), e)
        oracle = [1 + math.sqrt(2) * e[0], 1 + math.sqrt(2) * e[1], 0.0]
        np.testing.assert_allclose(got, oracle, atol=1e-15)
        np.testing.assert_allclose(got, [2, 2, 0], atol=1e-12)

    @pytest.mark.parametrize("l", [0.0, -1.0])
    def test_rejects_nonpositive_length(self, l):
        with pytest.raises(ValueError):
            compose_human_position((0, 0, 0), l, (1, 0, 0))

    @given(coords, coords, st.floats(0.01, 10.0), angles)
    def test_round_trip_recovers_direction(self, x, y, l, a):
        e = unit_from(a)
        xh = compose_human_position((x, y, 0.0), l, e)
        d = xh - np.array([x, y, 0.0])
        np.testing.assert_allclose(d / np.linalg.norm(d), e, atol=1e-9)
        assert abs(np.linalg.norm(d) - l) < 1e-9 * max(1.0, abs(x), abs(y))


class TestDifferentiation:
    def test_uniform_motion(self):
        p = np.array([[0.0, 0.0], [0.02, 0.0], [0.04, 0.0]])
        np.testing.assert_allclose(finite_difference_velocity(p, Timebase(0.02)), [[1, 0]] * 3, atol=1e-12)

    def test_constant_positions(self):
        v = finite_difference_velocity(np.ones((7, 2)), Timebase())
        np.testing.assert_array_equal(v, np.zeros((7, 2)))

    def test_quadratic_against_analytic_derivative(self):
        T = 0.02
        t = np.arange(50) * T
        v = finite_difference_velocity(t ** 2, Timebase(T))[:, 0]
        assert np.max(np.abs(v - 2 * t)) <= T ** 2

    def test_rejects_short_input(self):
        with pytest.raises(ValueError):
            finite_difference_velocity(np.zeros((1, 2)), Timebase())

    def test_length_preserved_for_two_samples(self):
        v = finite_difference_velocity([[0.0, 0.0], [0.1, 0.2]], Timebase(0.1))
        np.testing.assert_allclose(v, [[1, 2], [1, 2]])

    @given(st.floats(-5, 5), st.floats(-5, 5), st.floats(-5, 5), st.floats(-5, 5), st.integers(2, 40))
    def test_affine_sequence_gives_constant_slope(self, x0, y0, vx, vy, n):
        T = 0.02
        t = np.arange(n)[:, None] * T
        p = np.array([x0, y0]) + t * np.array([vx, vy])
        v = finite_difference_velocity(p, Timebase(T))
        np.testing.assert_allclose(v, np.tile([vx, vy], (n, 1)), atol=1e-9)


class TestSmoothing:
    def test_centered_window(self):
        x = np.arange(9.0)
        np.testing.assert_allclose(moving_average(x, 5)[2:-2], x[2:-2])
        assert moving_average(x, 5)[0] == pytest.approx(1.0)  # mean of 0, 1, 2

    def test_window_one_is_identity(self):
        x = np.random.default_rng(0).normal(size=(10, 2))
        np.testing.assert_array_equal(moving_average(x, 1), x)

    @given(st.lists(st.floats(-10, 10), min_size=1, max_size=30), st.integers(1, 9))
    def test_stays_within_range(self, xs, w):
        x = np.array(xs)
        y = moving_average(x, w)
        assert y.shape == x.shape
        assert np.all(y >= x.min() - 1e-9) and np.all(y <= x.max() + 1e-9)


class TestTypes:
    def test_timebase_default(self):
        tb = Timebase()
        assert tb.period_T == 0.02 and tb.rate_hz == pytest.approx(50.0)

    @pytest.mark.parametrize("T", [0.0, -0.1, float("inf"), float("nan")])
    def test_timebase_rejects(self, T):
        with pytest.raises(ValueError):
            Timebase(T)

    @given(angles)
    def test_unit_vec_yaw(self, a):
        np.testing.assert_allclose(UnitVecYaw(a).as_vector, [math.cos(a), math.sin(a), 0.0], atol=1e-12)

    def test_planar_state_pins_third_component(self):
        with pytest.raises(ValueError):
            PlanarState(x=[0, 0, 1])
        s = PlanarState(x=[1, 2], v=[3, 4], theta=3 * math.pi)
        assert s.x[2] == 0.0 and s.speed == pytest.approx(5.0)
        assert -math.pi < s.theta <= math.pi

    @given(st.floats(-100, 100))
    def test_wrap_angle_range_and_equivalence(self, a):
        w = wrap_angle(a)
        assert -math.pi < w <= math.pi
        assert abs(math.sin(w) - math.sin(a)) < 1e-9 and abs(math.cos(w) - math.cos(a)) < 1e-9

    def test_rng_streams(self):
        a = make_rng(3, 1).random(4)
        np.testing.assert_array_equal(a, make_rng(3, 1).random(4))
        assert not np.array_equal(a, make_rng(3, 2).random(4))
