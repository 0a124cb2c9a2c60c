"""Randomised invariants of the barrier and the projection, driven by hypothesis."""

import math

import numpy as np
import pytest
from hypothesis import assume, given, settings
from hypothesis import strategies as st

from cbfcompose.barrier import NonUniqueMinimizer, evaluate_pairs, h_value
from cbfcompose.dynamics import analytic_arc
from cbfcompose.errors import DegenerateRelativeMotion, NegativeRadicand
from cbfcompose.qp import QpProblem, solve
from cbfcompose.safety import SafetyKind, radicand, rho_pair
from cbfcompose.verification import pair_spec, reference_straight_maneuver, reference_turn_maneuver

coord = st.floats(-200, 200, allow_nan=False)
angle = st.floats(-math.pi, math.pi, allow_nan=False)
pose = st.tuples(coord, coord, angle)
kinds = st.sampled_from(list(SafetyKind))
SQUARED_SIBLING = {
    SafetyKind.EUCLIDEAN_SQ: SafetyKind.EUCLIDEAN_SQ,
    SafetyKind.PLAIN_SQRT: SafetyKind.EUCLIDEAN_SQ,
    SafetyKind.ADJUSTED_SQ: SafetyKind.ADJUSTED_SQ,
    SafetyKind.ADJUSTED_SQRT: SafetyKind.ADJUSTED_SQ,
}
maneuvers = st.sampled_from([reference_turn_maneuver(), reference_straight_maneuver()])


def _h(spec, x):
    try:
        return h_value(spec, x)
    except (NegativeRadicand, NonUniqueMinimizer, DegenerateRelativeMotion):
        assume(False)


def _rounding_scale(man, x):
    # size of the terms that cancel in the closed-form minimum
    turn_radius = max(abs(v / w) for v, w in man.inputs if w) if man.omega else 0.0
    return 1.0 + float(np.sum((x[0, :2] - x[1, :2]) ** 2)) + 4.0 * turn_radius**2


@settings(max_examples=300, deadline=None)
@given(pose, pose, kinds, maneuvers)
def test_barrier_never_exceeds_current_safety(a, b, kind, man):
    # compared before the square root, which would amplify rounding near zero
    spec = pair_spec(kind, man)
    squared = pair_spec(SQUARED_SIBLING[kind], man)
    x = np.array([a, b])
    try:
        rad_min = evaluate_pairs([squared], x, grad=False).radicand_min[0]
    except (NonUniqueMinimizer, DegenerateRelativeMotion):
        assume(False)
    now = radicand(spec.safety, x[0], x[1])
    assert rad_min <= now + 1e-14 * _rounding_scale(man, x)
    if not kind.sqrt:
        assert _h(spec, x) <= rho_pair(spec.safety, x[0], x[1]) + 1e-14 * _rounding_scale(man, x)


@settings(max_examples=200, deadline=None)
@given(pose, pose, kinds, maneuvers, coord, coord)
def test_barrier_is_translation_invariant(a, b, kind, man, dx, dy):
    spec = pair_spec(kind, man)
    x = np.array([a, b])
    shifted = x + [dx, dy, 0.0]
    h0, h1 = _h(spec, x), _h(spec, shifted)
    assert h1 == pytest.approx(h0, rel=1e-7, abs=1e-6)


@settings(max_examples=200, deadline=None)
@given(pose, pose, st.sampled_from([SafetyKind.PLAIN_SQRT]), maneuvers, angle)
def test_plain_barrier_is_rotation_invariant(a, b, kind, man, phi):
    spec = pair_spec(kind, man)
    x = np.array([a, b])
    c, s = math.cos(phi), math.sin(phi)
    turned = np.column_stack([c * x[:, 0] - s * x[:, 1], s * x[:, 0] + c * x[:, 1], x[:, 2] + phi])
    assert _h(spec, turned) == pytest.approx(_h(spec, x), rel=1e-7, abs=1e-6)


@settings(max_examples=200, deadline=None)
@given(pose, pose, kinds, maneuvers, st.floats(0.0, 20.0))
def test_barrier_does_not_drop_along_the_maneuver(a, b, kind, man, s):
    # flying the evading maneuver only shrinks the set of future times
    spec = pair_spec(kind, man)
    x = np.array([a, b])
    later = analytic_arc(x, man.as_array(), s)
    h0, h1 = _h(spec, x), _h(spec, later)
    assert h1 >= h0 - 1e-7 * max(1.0, abs(h0))


@st.composite
def feasible_problems(draw):
    m = draw(st.integers(1, 4))
    r = draw(st.integers(1, 8))
    seed = draw(st.integers(0, 2**32 - 1))
    rng = np.random.default_rng(seed)
    g = rng.normal(size=(r, m))
    point = rng.normal(size=m)
    d = g @ point - rng.uniform(0, 1, r)
    return QpProblem(rng.normal(size=m) * 3, g, d)


@settings(max_examples=300, deadline=None)
@given(feasible_problems())
def test_projection_is_idempotent(p):
    u = solve(p).u_star
    again = solve(QpProblem(u, p.g_matrix, p.d_vector)).u_star
    assert np.allclose(again, u, atol=1e-8)


@settings(max_examples=300, deadline=None)
@given(feasible_problems(), st.floats(0.1, 10.0))
def test_projection_ignores_row_scaling(p, c):
    a = solve(p).u_star
    b = solve(QpProblem(p.u_hat, c * p.g_matrix, c * p.d_vector)).u_star
    assert np.allclose(a, b, atol=1e-7)
