import numpy as np
import pytest

from cbfcompose.dynamics import ControlBounds
from cbfcompose.errors import Infeasible, IterationLimit
from cbfcompose.qp import QpProblem, kkt_residual, solve
from cbfcompose.verification import enumerate_projection, random_feasible_problem, random_infeasible_problem


def test_feasible_nominal_is_returned():
    p = QpProblem([1.0, 2.0], [[1.0, 0.0], [0.0, 1.0]], [0.0, 0.0])
    sol = solve(p)
    assert np.array_equal(sol.u_star, [1.0, 2.0])
    assert sol.active_set == frozenset() and sol.iterations == 0


def test_single_active_row():
    sol = solve(QpProblem([0.0], [[1.0]], [1.0]))
    assert sol.u_star[0] == pytest.approx(1.0)
    assert sol.active_set == {0}
    assert sol.multipliers[0] == pytest.approx(1.0)


def test_conflicting_rows_with_box_are_infeasible():
    c = 0.4
    rows = c * np.array([[-1, -1, -1, -1, 0, 0], [-1, 1, 0, 0, -1, 1]], dtype=float)
    a, b = ControlBounds(1.0, 2.0, 1.0).stacked_polytope(3)
    p = QpProblem(np.tile([1.5, 0.0], 3), np.vstack([rows, a]), np.concatenate([[0.0, 0.0], b]))
    with pytest.raises(Infeasible) as err:
        solve(p)
    cert = err.value.certificate
    assert cert


def test_problem_validation():
    with pytest.raises(ValueError):
        QpProblem([1.0], [[1.0, 2.0]], [0.0])
    with pytest.raises(ValueError):
        QpProblem([np.nan], [[1.0]], [0.0])


def test_random_problems_match_enumeration(rng):
    for _ in range(300):
        p = random_feasible_problem(rng)
        sol = solve(p)
        assert np.allclose(sol.u_star, enumerate_projection(p), atol=1e-6)
        assert p.feasible(sol.u_star)
        assert kkt_residual(p, sol) <= 1e-9
        assert all(lam >= -1e-9 for lam in sol.multipliers.values())


def test_infeasible_problems_are_flagged(rng):
    for _ in range(200):
        p, y = random_infeasible_problem(rng)
        # the construction really is a certificate
        assert np.allclose(y @ p.g_matrix, 0) and y @ p.d_vector > 0
        with pytest.raises(Infeasible):
            solve(p)


def test_non_binding_row_changes_nothing(rng):
    for _ in range(100):
        p = random_feasible_problem(rng)
        base = solve(p).u_star
        normal = rng.normal(size=p.u_hat.size)
        extra = QpProblem(p.u_hat, np.vstack([p.g_matrix, normal]), np.append(p.d_vector, normal @ base - 1.0))
        assert np.allclose(solve(extra).u_star, base, atol=1e-9)


def test_solution_is_closest_feasible_point(rng):
    p = random_feasible_problem(rng, m=3, r=8)
    u_star = solve(p).u_star
    best = np.linalg.norm(u_star - p.u_hat)
    samples = rng.normal(size=(20000, 3)) * 3
    ok = np.all(samples @ p.g_matrix.T - p.d_vector >= 0, axis=1)
    assert ok.sum() > 0
    assert np.all(np.linalg.norm(samples[ok] - p.u_hat, axis=1) >= best - 1e-12)


def test_iteration_cap():
    p = random_feasible_problem(np.random.default_rng(0), m=4, r=12)
    if solve(p).iterations > 1:
        with pytest.raises(IterationLimit):
            solve(p, max_iter=1)
