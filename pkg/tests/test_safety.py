import math

import numpy as np
import pytest

from cbfcompose.errors import DegenerateGradient, NegativeRadicand
from cbfcompose.safety import SafetyFnSpec, SafetyKind, pair_distance_sq, rho, rho_gradient
from cbfcompose.verification import finite_difference_gradient

K = SafetyKind


def team(*poses):
    return np.array(poses, dtype=float)


def test_pair_distance():
    x = team([0, 0, 0], [3, 4, 1])
    assert pair_distance_sq(x, 0, 1) == 25.0
    assert pair_distance_sq(x, 1, 0) == 25.0
    assert pair_distance_sq(team([1, 1, 0], [1, 1, 2]), 0, 1) == 0.0


def test_rho_examples():
    x = team([0, 0, 0], [10, 0, 0])
    assert rho(SafetyFnSpec(K.EUCLIDEAN_SQ, 0, 1, 5.0), x) == 75.0
    assert rho(SafetyFnSpec(K.ADJUSTED_SQ, 0, 1, 5.0, 0.01), x) == 75.0
    x_back = team([0, 0, math.pi], [10, 0, 0])
    assert rho(SafetyFnSpec(K.ADJUSTED_SQ, 0, 1, 5.0, 0.01), x_back) == pytest.approx(74.98, abs=1e-12)
    assert rho(SafetyFnSpec(K.PLAIN_SQRT, 0, 1, 5.0), x) == 5.0


def test_heading_term_uses_lower_index():
    spec = SafetyFnSpec(K.ADJUSTED_SQ, 1, 2, 1.0, 0.5)
    x = team([0, 0, 0], [0, 0, math.pi], [3, 0, 0])
    # theta of vehicle 1 (the lower index of the pair), not vehicle 2
    assert rho(spec, x) == pytest.approx(9 - 1.0 - 1.0)


def test_spec_validation():
    with pytest.raises(ValueError):
        SafetyFnSpec(K.EUCLIDEAN_SQ, 1, 1, 5.0)
    with pytest.raises(ValueError):
        SafetyFnSpec(K.EUCLIDEAN_SQ, 2, 1, 5.0)
    with pytest.raises(ValueError):
        SafetyFnSpec(K.EUCLIDEAN_SQ, 0, 1, 0.0)
    with pytest.raises(ValueError):
        SafetyFnSpec(K.ADJUSTED_SQRT, 0, 1, 5.0, 0.0)


def test_sqrt_rejects_negative_radicand():
    spec = SafetyFnSpec(K.ADJUSTED_SQRT, 0, 1, 1.0, 0.5)
    with pytest.raises(NegativeRadicand):
        rho(spec, team([0, 0, math.pi], [0.1, 0, 0]))


def test_sqrt_gradient_degenerate_at_zero():
    with pytest.raises(DegenerateGradient):
        rho_gradient(SafetyFnSpec(K.PLAIN_SQRT, 0, 1, 1.0), team([1, 1, 0], [1, 1, 0]))


def test_gradient_examples():
    x = team([1, 2, 0.3], [4, -2, 1.0], [9, 9, 9])
    g = rho_gradient(SafetyFnSpec(K.EUCLIDEAN_SQ, 0, 1, 1.0), x)
    assert g[0] == 2 * (1 - 4)
    assert np.all(g[6:] == 0)
    g = rho_gradient(SafetyFnSpec(K.ADJUSTED_SQ, 0, 1, 1.0, 0.01), x)
    assert g[2] == pytest.approx(-0.01 * math.sin(0.3))


@pytest.mark.parametrize("kind", list(K))
def test_gradient_matches_finite_differences(kind, rng):
    spec = SafetyFnSpec(kind, 0, 2, 5.0, 0.01)
    for _ in range(100):
        x = rng.uniform(-50, 50, (3, 3))
        g = rho_gradient(spec, x)
        fd = finite_difference_gradient(lambda y: rho(spec, y), x)
        assert np.max(np.abs(g - fd)) / max(1.0, np.max(np.abs(g))) <= 1e-6


def test_properties(rng):
    for _ in range(200):
        x = rng.uniform(-20, 20, (2, 3))
        e = rho(SafetyFnSpec(K.EUCLIDEAN_SQ, 0, 1, 5.0), x)
        a = rho(SafetyFnSpec(K.ADJUSTED_SQ, 0, 1, 5.0, 0.01), x)
        assert (e >= 0) == (math.dist(x[0, :2], x[1, :2]) >= 5.0)
        assert abs(a - e) <= 2 * 0.01 + 1e-12
        shift = x + [rng.normal() * 100, rng.normal() * 100, 0]
        for kind in K:
            spec = SafetyFnSpec(kind, 0, 1, 5.0, 0.01)
            try:
                assert rho(spec, shift) == pytest.approx(rho(spec, x), abs=1e-9)
            except NegativeRadicand:
                pass
