import math

import numpy as np
import pytest

from cbfcompose.dynamics import (
    ControlBounds,
    analytic_arc,
    arc_jacobian,
    integrate_rk4,
    integrate_sensitivity,
    unicycle_flow,
)
from cbfcompose.errors import ConfigError


@pytest.mark.parametrize(
    "theta, u, expected",
    [
        (0.0, (1.0, 0.0), (1.0, 0.0, 0.0)),
        (math.pi / 2, (2.0, 1.0), (0.0, 2.0, 1.0)),
        (math.pi / 4, (math.sqrt(2.0), -1.0), (1.0, 1.0, -1.0)),
    ],
)
def test_flow_examples(theta, u, expected):
    assert np.allclose(unicycle_flow([0.0, 0.0, theta], u), expected, atol=1e-15)


def test_flow_speed_magnitude(rng):
    th = rng.uniform(-10, 10, 50)
    v = rng.uniform(0, 30, 50)
    d = unicycle_flow(np.column_stack([np.zeros(50), np.zeros(50), th]), np.column_stack([v, rng.normal(size=50)]))
    assert np.allclose(np.hypot(d[:, 0], d[:, 1]), v)


def test_rk4_straight_line_is_exact():
    out = integrate_rk4(np.array([[0.0, 0.0, 0.0]]), np.array([[1.0, 0.0]]), 1.0)
    assert np.allclose(out, [[1.0, 0.0, 0.0]], atol=1e-15)


def test_rk4_turn_matches_arc():
    out = integrate_rk4(np.array([[0.0, 0.0, 0.0]]), np.array([[1.0, 1.0]]), 0.1)
    assert np.allclose(out[0], [math.sin(0.1), 1 - math.cos(0.1), 0.1], atol=1e-8)


def test_rk4_zero_step_is_identity(rng):
    x = rng.normal(size=(3, 3))
    assert np.array_equal(integrate_rk4(x, rng.normal(size=(3, 2)), 0.0), x)


def test_arc_examples():
    assert np.allclose(analytic_arc([0, 0, 0], (1, 1), math.pi), [0, 2, math.pi], atol=1e-12)
    assert np.allclose(analytic_arc([0, 0, 0], (1, 0), 3.0), [3, 0, 0])


def test_arc_full_period(rng):
    pose = rng.normal(size=3)
    w = 0.3
    out = analytic_arc(pose, (2.0, w), 2 * math.pi / w)
    assert np.allclose(out[:2], pose[:2], atol=1e-12)
    assert out[2] == pytest.approx(pose[2] + 2 * math.pi)


def test_arc_semigroup(rng):
    for _ in range(50):
        pose = rng.normal(size=3) * [50, 50, 3]
        u = (rng.uniform(1, 20), rng.choice([0.0, rng.normal()]))
        t1, t2 = rng.uniform(0, 5, 2)
        two = analytic_arc(analytic_arc(pose, u, t1), u, t2)
        assert np.allclose(analytic_arc(pose, u, t1 + t2), two, atol=1e-12, rtol=0)


def test_rk4_agrees_with_arc(rng):
    # 100 independent vehicles stepped together; each is read off at its own tau
    dt = 1e-3
    poses = rng.normal(size=(100, 3)) * [10, 10, 3]
    u = np.column_stack([rng.uniform(0.5, 5, 100), rng.uniform(-1, 1, 100)])
    steps = rng.integers(0, 10001, 100)
    x = poses.copy()
    end = np.empty_like(poses)
    for n in range(steps.max() + 1):
        end[steps == n] = x[steps == n]
        x = integrate_rk4(x, u, dt)
    exact = analytic_arc(poses, u, steps * dt)
    assert np.max(np.abs(end[:, :2] - exact[:, :2])) <= 1e-6


def test_arc_jacobian_against_variational_equation(rng):
    for _ in range(20):
        pose = rng.normal(size=3) * [10, 10, 3]
        u = (rng.uniform(1, 5), rng.choice([0.0, rng.uniform(-1, 1)]))
        tau = rng.uniform(0, 8)
        hat, jac = integrate_sensitivity(pose, u, tau, steps=500)
        assert np.allclose(hat, analytic_arc(pose, u, tau), atol=1e-9)
        assert np.allclose(jac, arc_jacobian(pose, u, tau), atol=1e-9)


def test_bounds_polytope():
    b = ControlBounds(15.0, 25.0, 0.2)
    a, rhs = b.polytope()
    assert np.array_equal(a, [[1, 0], [-1, 0], [0, 1], [0, -1]])
    assert np.allclose(rhs, [15, -25, -0.2, -0.2])
    assert np.all(a @ [20.0, 0.1] >= rhs)
    assert not np.all(a @ [26.0, 0.0] >= rhs)
    sa, sb = b.stacked_polytope(3)
    assert sa.shape == (12, 6) and sb.shape == (12,)


@pytest.mark.parametrize("args", [(0.0, 1.0, 1.0), (2.0, 1.0, 1.0), (1.0, 2.0, -0.1)])
def test_bounds_reject_bad_limits(args):
    with pytest.raises(ConfigError):
        ControlBounds(*args)


def test_bounds_membership():
    b = ControlBounds(1.0, 2.0, 1.0)
    assert b.contains([1.5, 0.0]) and not b.contains([1.5, 1.1])
    assert b.interior([1.5, 0.5]) and not b.interior([1.0, 0.5])
