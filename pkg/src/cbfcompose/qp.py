"""Euclidean projection onto a polytope: ``min 0.5*||u - u_hat||^2  s.t.  G u >= d``.

The problems met by the safety filter are tiny and dense, so a dual
active-set method (Goldfarb-Idnani with identity Hessian) is used.  It starts
from the unconstrained minimiser, adds violated rows one at a time and
certifies infeasibility without a separate phase-one problem.
"""

from dataclasses import dataclass, field

import numpy as np

from .errors import Infeasible, IterationLimit

FEAS_TOL = 1e-8
KKT_TOL = 1e-9
_ZERO = 1e-12


@dataclass
class QpProblem:
    u_hat: np.ndarray
    g_matrix: np.ndarray
    d_vector: np.ndarray

    def __post_init__(self):
        self.u_hat = np.atleast_1d(np.asarray(self.u_hat, dtype=float))
        self.g_matrix = np.atleast_2d(np.asarray(self.g_matrix, dtype=float))
        self.d_vector = np.atleast_1d(np.asarray(self.d_vector, dtype=float))
        m = self.u_hat.shape[0]
        r = self.d_vector.shape[0]
        if m < 1 or r < 1:
            raise ValueError("need at least one variable and one constraint")
        if self.g_matrix.shape != (r, m):
            raise ValueError(f"constraint matrix has shape {self.g_matrix.shape}, expected {(r, m)}")
        if not (np.all(np.isfinite(self.g_matrix)) and np.all(np.isfinite(self.d_vector))
                and np.all(np.isfinite(self.u_hat))):
            raise ValueError("QP data must be finite")

    def slack(self, u):
        return self.g_matrix @ u - self.d_vector

    def feasible(self, u, tol=FEAS_TOL):
        return bool(np.all(self.slack(u) >= -tol))


@dataclass
class QpSolution:
    u_star: np.ndarray
    active_set: frozenset
    iterations: int
    multipliers: dict = field(default_factory=dict)


def _active_step(normals, n_p):
    """Primal direction ``z`` (component of ``n_p`` orthogonal to the active normals)
    and the coefficients ``r`` of ``n_p`` in the active normals."""
    if not normals:
        return n_p.copy(), np.zeros(0)
    n = np.column_stack(normals)
    q, rr = np.linalg.qr(n)
    r = np.linalg.solve(rr, q.T @ n_p)
    return n_p - q @ (q.T @ n_p), r


def solve(problem, max_iter=None):
    """Solve the projection QP; raise :class:`Infeasible` if the polytope is empty."""
    g, d = problem.g_matrix, problem.d_vector
    n_rows = d.shape[0]
    if max_iter is None:
        max_iter = 100 * n_rows
    u = problem.u_hat.copy()
    active = []  # row indices, in insertion order
    lam = []  # multipliers, aligned with active
    it = 0

    while True:
        s = g @ u - d
        violated = np.flatnonzero(s < -FEAS_TOL)
        if violated.size == 0:
            break
        # most violated row enters; argmin breaks ties by lowest index
        p = int(violated[np.argmin(s[violated])])
        lam_p = 0.0
        n_p = g[p]
        while True:
            it += 1
            if it > max_iter:
                raise IterationLimit(f"active-set solver exceeded {max_iter} iterations")
            z, r = _active_step([g[a] for a in active], n_p)
            t1, drop = np.inf, None
            for idx, (rj, lj) in enumerate(zip(r, lam)):
                if rj > _ZERO and lj / rj < t1:
                    t1, drop = lj / rj, idx
            zn = float(z @ n_p)
            t2 = -(n_p @ u - d[p]) / zn if np.linalg.norm(z) > _ZERO * max(1.0, np.linalg.norm(n_p)) and zn > 0 else np.inf
            if not np.isfinite(t1) and not np.isfinite(t2):
                cert = {a: float(rj) for a, rj in zip(active, r)}
                cert[p] = -1.0
                raise Infeasible(f"constraint {p} cannot be satisfied together with rows {sorted(active)}", cert)
            t = min(t1, t2)
            if np.isfinite(t2):
                u = u + t * z
            lam = [lj - t * rj for lj, rj in zip(lam, r)]
            lam_p += t
            if t2 <= t1:
                active.append(p)
                lam.append(lam_p)
                break
            del active[drop]
            del lam[drop]

    mult = {a: max(lj, 0.0) for a, lj in zip(active, lam)}
    return QpSolution(u_star=u, active_set=frozenset(active), iterations=it, multipliers=mult)


def kkt_residual(problem, sol):
    """Stationarity residual ``||u* - u_hat - G_A^T lambda||_inf`` of a solution."""
    res = sol.u_star - problem.u_hat
    for a, lj in sol.multipliers.items():
        res = res - lj * problem.g_matrix[a]
    return float(np.max(np.abs(res)))
