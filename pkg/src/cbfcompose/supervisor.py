"""Safety filters that enforce every pairwise barrier at once.

All barriers of a team are built from one shared evading maneuver, which is
what keeps the stacked constraint set non-empty inside the safe set.  The
centralized filter solves one QP over all inputs.  The decentralized filter
lets vehicle ``i`` solve a QP over its own input only, using the poses of
the others and the shared maneuver but never their nominal inputs.
"""

import enum
import itertools
from dataclasses import dataclass

import numpy as np

from . import barrier as bar
from .errors import InvalidManeuver, UnsafeState
from .qp import FEAS_TOL, QpProblem, solve
from .safety import SafetyFnSpec, SafetyKind

UNSAFE_TOL = 1e-6


class AlphaKind(enum.Enum):
    LINEAR = "linear"


@dataclass(frozen=True)
class AlphaFunction:
    """Extended class-K function; only the linear family ``kappa * h`` is provided."""

    kappa: float = 1.0
    kind: AlphaKind = AlphaKind.LINEAR

    def __post_init__(self):
        if not self.kappa > 0:
            raise ValueError(f"kappa must be positive, got {self.kappa}")

    def __call__(self, h):
        return self.kappa * h


@dataclass
class ConstraintSet:
    barriers: list
    zeta: list  # zeta[j]: vehicles whose input enters constraint j
    a_sets: list  # a_sets[i]: constraints that vehicle i's input enters
    k: int

    @property
    def q(self):
        return len(self.barriers)

    @property
    def maneuver(self):
        return self.barriers[0].maneuver


def build_shared_maneuver_constraints(k, safety_kind, maneuver, d_s, delta=0.0):
    """One barrier per vehicle pair, all built from the same maneuver instance."""
    if k < 2:
        raise ValueError(f"need at least two vehicles, got {k}")
    if not isinstance(maneuver, bar.EvadingManeuver):
        raise InvalidManeuver(f"expected an EvadingManeuver, got {type(maneuver).__name__}")
    if maneuver.k != k:
        raise InvalidManeuver(f"maneuver covers {maneuver.k} vehicles, scenario has {k}")
    safety_kind = SafetyKind(safety_kind)
    barriers, zeta = [], []
    a_sets = [[] for _ in range(k)]
    for idx, (i, j) in enumerate(itertools.combinations(range(k), 2)):
        barriers.append(bar.BarrierSpec(SafetyFnSpec(safety_kind, i, j, d_s, delta), maneuver))
        zeta.append(frozenset((i, j)))
        a_sets[i].append(idx)
        a_sets[j].append(idx)
    return ConstraintSet(barriers=barriers, zeta=zeta, a_sets=a_sets, k=k)


def evaluate_constraints(cs, x, indices=None, grad=True):
    """Batch barrier evaluation for the listed constraints (all of them by default).

    The result's ``index`` attribute holds the constraint numbers, in order.
    """
    indices = list(range(cs.q)) if indices is None else list(indices)
    ev = bar.evaluate_pairs([cs.barriers[j] for j in indices], x, grad=grad)
    ev.index = np.array(indices, dtype=int)
    return ev


def _check_safe(evals, tol=UNSAFE_TOL):
    n = int(np.argmin(evals.value))
    if evals.value[n] < -tol:
        h = dict(zip(evals.index.tolist(), evals.value.tolist()))
        raise UnsafeState(f"state is outside the safe set: h[{evals.index[n]}] = {evals.value[n]:.3e}", h)


def centralized_rows(evals, alpha):
    """Barrier rows ``L_g h u >= -L_f h - alpha(h)`` over the stacked input."""
    return evals.dense_lie_g(), -evals.lie_f - alpha(evals.value)


def decentralized_rows(evals, cs, alpha, i, gamma, n_inputs=2):
    """Rows over ``u_i`` alone: everybody else is assumed to fly ``gamma`` and
    vehicle ``i`` only claims its ``1/|zeta_j|`` share of the margin."""
    gamma = np.asarray(gamma, dtype=float)
    sl = slice(n_inputs * i, n_inputs * (i + 1))
    keep = np.flatnonzero((evals.i == i) | (evals.j == i))
    lg = evals.dense_lie_g()[keep]
    lie_f = evals.lie_f[keep]
    a = alpha(evals.value[keep])
    size = np.array([len(cs.zeta[j]) for j in evals.index[keep]], dtype=float)
    full = lie_f + lg @ gamma + a
    others = lg @ gamma - lg[:, sl] @ gamma[sl]
    rhs = -(lie_f + a + others) + (size - 1) / size * full
    return lg[:, sl], rhs


def centralized_problem(cs, alpha, x, u_hat, bounds, evals=None):
    if evals is None:
        evals = evaluate_constraints(cs, x)
    _check_safe(evals)
    g_bar, d_bar = centralized_rows(evals, alpha)
    a, b = bounds.stacked_polytope(cs.k)
    return QpProblem(np.ravel(u_hat), np.vstack([g_bar, a]), np.concatenate([d_bar, b]))


def centralized_solve(cs, alpha, x, u_hat, bounds, evals=None):
    return solve(centralized_problem(cs, alpha, x, u_hat, bounds, evals))


def centralized_filter(cs, alpha, x, u_hat, bounds):
    """Minimal change of the stacked nominal input that keeps every barrier row satisfied."""
    return centralized_solve(cs, alpha, x, u_hat, bounds).u_star


def decentralized_problem(cs, alpha, x, u_hat_i, i, bounds, evals=None):
    if evals is None:
        evals = evaluate_constraints(cs, x, cs.a_sets[i])
    _check_safe(evals)
    g_bar, d_bar = decentralized_rows(evals, cs, alpha, i, cs.maneuver.stacked())
    a, b = bounds.polytope()
    return QpProblem(np.ravel(u_hat_i), np.vstack([g_bar, a]), np.concatenate([d_bar, b]))


def decentralized_solve(cs, alpha, x, u_hat_i, i, bounds, evals=None):
    return solve(decentralized_problem(cs, alpha, x, u_hat_i, i, bounds, evals))


def decentralized_filter(cs, alpha, x, u_hat_i, i, bounds):
    """Vehicle ``i``'s safe input; it evaluates only the barriers it takes part in."""
    return decentralized_solve(cs, alpha, x, u_hat_i, i, bounds).u_star


@dataclass
class MembershipReport:
    actuator: list  # per vehicle
    centralized: list  # per constraint: u in K_{h^j}
    decentralized: dict  # (i, j) -> u_i in K_{i,j}

    @property
    def in_k_cap(self):
        return all(self.centralized)

    @property
    def in_k_dec(self):
        return all(self.decentralized.values())


def admissible_membership(cs, alpha, x, u, bounds, evals=None, tol=FEAS_TOL):
    """Which admissible sets contain the stacked input ``u``."""
    u = np.ravel(np.asarray(u, dtype=float))
    if evals is None:
        evals = evaluate_constraints(cs, x)
    per_vehicle = u.reshape(-1, 2)
    actuator = [bounds.contains(ui, tol) for ui in per_vehicle]
    g, d = centralized_rows(evals, alpha)
    rows_ok = g @ u - d >= -tol
    centralized = [bool(ok and all(actuator[v] for v in cs.zeta[j])) for j, ok in zip(evals.index, rows_ok)]
    gamma = cs.maneuver.stacked()
    decentralized = {}
    for i in range(cs.k):
        gi, di = decentralized_rows(evals, cs, alpha, i, gamma)
        slack = gi @ per_vehicle[i] - di
        mine = evals.index[(evals.i == i) | (evals.j == i)]
        for j, s in zip(mine.tolist(), slack):
            decentralized[(i, j)] = bool(s >= -tol and actuator[i])
    return MembershipReport(actuator=actuator, centralized=centralized, decentralized=decentralized)
