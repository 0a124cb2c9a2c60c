"""Barrier functions built from a constant evading maneuver.

``h(x)`` is the smallest value the pairwise safety function reaches if both
vehicles fly the evading maneuver forever starting from ``x``.  For a shared
turn rate the separation is a single sinusoid in the elapsed time, for a
straight maneuver it is a quadratic, so both have closed forms.  Any other
constant maneuver goes through the sampled rollout.

The closed forms are evaluated for many pairs at once (:func:`evaluate_pairs`);
the single-barrier functions are thin wrappers around the batch path.
"""

import enum
import math
from dataclasses import dataclass

import numpy as np

from .dynamics import analytic_arc, arc_jacobian
from .errors import (
    DegenerateGradient,
    DegenerateRelativeMotion,
    InvalidManeuver,
    NegativeRadicand,
    NonUniqueMinimizer,
)
from .safety import SafetyFnSpec, chain_sqrt, radicand, radicand_pair_gradient, rho_from_radicand, scatter_pair

UNIQUENESS_EPS = 1e-12
TWO_PI = 2.0 * math.pi


class ManeuverKind(enum.Enum):
    TURN = "turn"
    STRAIGHT = "straight"
    GENERAL = "general"


@dataclass(frozen=True)
class EvadingManeuver:
    """Constant per-vehicle input flown by every vehicle in the barrier rollout.

    Build with :meth:`turn`, :meth:`straight` or :meth:`general`.  One
    instance is shared by every pairwise barrier of a scenario.
    """

    kind: ManeuverKind
    inputs: tuple  # ((v_1, w_1), ..., (v_k, w_k))
    horizon: float = None  # rollout length, GENERAL only

    @classmethod
    def turn(cls, v, omega, sigma):
        if omega == 0:
            raise InvalidManeuver("turn maneuver needs a non-zero turn rate")
        if v <= 0 or any(s <= 0 for s in sigma):
            raise InvalidManeuver("turn maneuver needs positive speeds")
        return cls(ManeuverKind.TURN, tuple((float(s * v), float(omega)) for s in sigma))

    @classmethod
    def straight(cls, speeds):
        speeds = [float(s) for s in speeds]
        if any(s <= 0 for s in speeds):
            raise InvalidManeuver("straight maneuver needs positive speeds")
        if len(set(speeds)) != len(speeds):
            raise InvalidManeuver(f"straight maneuver speeds must be pairwise distinct, got {speeds}")
        return cls(ManeuverKind.STRAIGHT, tuple((s, 0.0) for s in speeds))

    @classmethod
    def general(cls, inputs, horizon):
        inputs = tuple((float(v), float(w)) for v, w in inputs)
        if not horizon or horizon <= 0:
            raise InvalidManeuver("a general maneuver needs a positive rollout horizon")
        return cls(ManeuverKind.GENERAL, inputs, float(horizon))

    @property
    def k(self):
        return len(self.inputs)

    @property
    def omega(self):
        return self.inputs[0][1]

    def as_array(self):
        return np.array(self.inputs, dtype=float)

    def stacked(self):
        """``gamma^s`` as a flat ``[v1, w1, v2, w2, ...]`` vector."""
        return self.as_array().ravel()

    def check_interior(self, bounds):
        if not bounds.interior(self.as_array()):
            raise InvalidManeuver(
                f"maneuver inputs {self.inputs} are not strictly inside the actuator limits {bounds}"
            )

    def period(self):
        if self.kind is not ManeuverKind.TURN:
            raise InvalidManeuver("only turn maneuvers are periodic")
        return TWO_PI / abs(self.omega)


@dataclass(frozen=True)
class BarrierSpec:
    safety: SafetyFnSpec
    maneuver: EvadingManeuver

    @property
    def pair(self):
        return self.safety.i, self.safety.j


@dataclass
class BarrierEval:
    value: float
    tau_star: float
    gradient: np.ndarray = None
    lie_f: float = None
    lie_g: np.ndarray = None


@dataclass
class PairEvals:
    """Barrier data for a batch of pairs ``(i[n], j[n])`` of a ``k``-vehicle team.

    ``grad6[n]`` holds ``dh/d(px_i, py_i, th_i, px_j, py_j, th_j)`` and
    ``lie_g4[n]`` the matching ``(v_i, w_i, v_j, w_j)`` entries of ``L_g h``;
    every other entry is zero.
    """

    i: np.ndarray
    j: np.ndarray
    k: int
    value: np.ndarray
    tau_star: np.ndarray
    radicand_min: np.ndarray
    grad6: np.ndarray = None
    lie_g4: np.ndarray = None
    index: np.ndarray = None  # constraint numbers, set by the supervisor

    def __len__(self):
        return len(self.value)

    @property
    def lie_f(self):
        return np.zeros(len(self.value))

    def dense_lie_g(self):
        out = np.zeros((len(self.value), 2 * self.k))
        rows = np.arange(len(self.value))
        out[rows, 2 * self.i] = self.lie_g4[:, 0]
        out[rows, 2 * self.i + 1] = self.lie_g4[:, 1]
        out[rows, 2 * self.j] = self.lie_g4[:, 2]
        out[rows, 2 * self.j + 1] = self.lie_g4[:, 3]
        return out

    def dense_gradient(self, n):
        g = np.zeros(3 * self.k)
        g[3 * self.i[n] : 3 * self.i[n] + 3] = self.grad6[n, :3]
        g[3 * self.j[n] : 3 * self.j[n] + 3] = self.grad6[n, 3:]
        return g


def phasor_sum(amplitudes, phases, is_sin):
    """Combine same-frequency sinusoids ``sum_n T_n trig_n(w t + p_n)`` into ``Re(P e^{jwt})``.

    ``T cos(wt + p)`` contributes ``T e^{jp}``; a sine term is the same phasor
    rotated by -90 degrees.  Works along the last axis.
    """
    c = np.asarray(amplitudes) * np.exp(1j * np.asarray(phases))
    return np.sum(np.where(is_sin, -1j * c, c), axis=-1)


_SIN_MASK = np.array([True, True, False, False, False])


def _map_radicand(rad, sqrt, d_s, pairs):
    if np.any(sqrt & (rad < 0)):
        n = int(np.argmin(np.where(sqrt, rad, np.inf)))
        raise NegativeRadicand(f"minimum radicand {rad[n]:.3e} < 0 for pair {pairs[n]}")
    return np.where(sqrt, np.sqrt(np.where(sqrt, np.maximum(rad, 0.0), 0.0)) - d_s, rad - d_s**2)


def _chain_sqrt(rad, sqrt, grad6, pairs):
    if not np.any(sqrt):
        return grad6
    if np.any(sqrt & (rad == 0)):
        n = int(np.flatnonzero(sqrt & (rad == 0))[0])
        raise DegenerateGradient(f"sqrt barrier has no gradient at zero radicand, pair {pairs[n]}")
    scale = np.where(sqrt, 0.5 / np.sqrt(np.where(sqrt, rad, 1.0)), 1.0)
    return grad6 * scale[:, None]


def _turn_batch(xi, xj, ri, rj, omega, delta, grad):
    pxi, pyi, thi = xi.T
    pxj, pyj, thj = xj.T
    si, ci, sj, cj = np.sin(thi), np.cos(thi), np.sin(thj), np.cos(thj)
    # offsets between the two turning-circle centres
    db = (pxi - ri * si) - (pxj - rj * sj)
    dc = (pyi + ri * ci) - (pyj + rj * cj)
    a1 = db**2 + dc**2 + ri**2 + rj**2 - 2.0 * ri * rj * np.cos(thi - thj) - delta
    amps = np.stack([2 * ri * db, -2 * rj * db, -2 * ri * dc, 2 * rj * dc, delta + 0 * db], axis=-1)
    phases = np.stack([thi, thj, thi, thj, thi], axis=-1)
    p = phasor_sum(amps, phases, _SIN_MASK)
    a2 = np.abs(p)
    big_theta = np.angle(p)
    if omega > 0:
        tau = np.mod(math.pi - big_theta, TWO_PI) / omega
    else:
        tau = np.mod(big_theta - math.pi, TWO_PI) / -omega
    rad = a1 - a2
    if not grad:
        return rad, tau, None
    if np.any(a2 <= UNIQUENESS_EPS):
        raise NonUniqueMinimizer(f"phasor amplitude {a2.min():.3e} vanishes; minimiser is not unique")

    ei, ej = np.exp(1j * thi), np.exp(1j * thj)
    w = ri * ei - rj * ej
    q = dc + 1j * db  # P = -2 q W + delta e^{j th_i}
    zero = np.zeros_like(db)
    one = np.ones_like(db)
    # derivatives of (db, dc, W, th_i, th_i - th_j) w.r.t. each pose coordinate
    partials = [
        (one, zero, 0j * zero, zero, zero),
        (zero, one, 0j * zero, zero, zero),
        (-ri * ci, -ri * si, 1j * ri * ei, one, one),
        (-one, zero, 0j * zero, zero, zero),
        (zero, -one, 0j * zero, zero, zero),
        (rj * cj, rj * sj, -1j * rj * ej, zero, -one),
    ]
    cross = 2.0 * ri * rj * np.sin(thi - thj)
    g = np.empty((len(db), 6))
    for n, (ddb, ddc, dw, dthi, ddiff) in enumerate(partials):
        da1 = 2.0 * db * ddb + 2.0 * dc * ddc + cross * ddiff
        dp = -2.0 * (ddc + 1j * ddb) * w - 2.0 * q * dw + delta * 1j * ei * dthi
        g[:, n] = da1 - np.real(np.conj(p) * dp) / a2
    return rad, tau, g


def _straight_batch(xi, xj, vi, vj, delta, grad):
    pxi, pyi, thi = xi.T
    pxj, pyj, thj = xj.T
    dpx, dpy = pxi - pxj, pyi - pyj
    dwx = vi * np.cos(thi) - vj * np.cos(thj)
    dwy = vi * np.sin(thi) - vj * np.sin(thj)
    a = dwx**2 + dwy**2
    if np.any(np.sqrt(a) < UNIQUENESS_EPS):
        raise DegenerateRelativeMotion("two vehicles fly identical velocity vectors under the maneuver")
    b = 2.0 * (dpx * dwx + dpy * dwy)
    tau = np.maximum(0.0, -b / (2.0 * a))
    ex, ey = dpx + tau * dwx, dpy + tau * dwy
    rad = ex**2 + ey**2 - delta + delta * np.cos(thi)
    if not grad:
        return rad, tau, None
    # tau is held fixed: d/dtau vanishes at an interior vertex, and a clamped
    # vertex sits at tau = 0 where the heading terms drop out anyway
    g = np.stack(
        [
            2.0 * ex,
            2.0 * ey,
            2.0 * tau * vi * (-ex * np.sin(thi) + ey * np.cos(thi)) - delta * np.sin(thi),
            -2.0 * ex,
            -2.0 * ey,
            -2.0 * tau * vj * (-ex * np.sin(thj) + ey * np.cos(thj)),
        ],
        axis=-1,
    )
    return rad, tau, g


def evaluate_pairs(specs, x, grad=True):
    """Evaluate a batch of barriers that share one maneuver at team state ``x``."""
    x = np.asarray(x, dtype=float)
    if not specs:
        raise ValueError("no barriers to evaluate")
    m = specs[0].maneuver
    if any(s.maneuver is not m and s.maneuver != m for s in specs):
        raise InvalidManeuver("barriers in one batch must share the evading maneuver")
    if m.k != x.shape[0]:
        raise InvalidManeuver(f"maneuver covers {m.k} vehicles, state has {x.shape[0]}")
    i = np.array([s.safety.i for s in specs])
    j = np.array([s.safety.j for s in specs])
    pairs = list(zip(i.tolist(), j.tolist()))
    sqrt = np.array([s.safety.kind.sqrt for s in specs])
    d_s = np.array([s.safety.d_s for s in specs])
    delta = np.array([s.safety.effective_delta for s in specs])
    u = m.as_array()
    k = x.shape[0]

    if m.kind is ManeuverKind.TURN:
        if np.any(u[:, 1] != m.omega) or m.omega == 0:
            raise InvalidManeuver("turn closed form needs one shared non-zero turn rate")
        rad, tau, g = _turn_batch(x[i], x[j], u[i, 0] / m.omega, u[j, 0] / m.omega, m.omega, delta, grad)
    elif m.kind is ManeuverKind.STRAIGHT:
        if np.any(u[:, 1] != 0):
            raise InvalidManeuver("straight closed form needs zero turn rates")
        rad, tau, g = _straight_batch(x[i], x[j], u[i, 0], u[j, 0], delta, grad)
    else:
        rad, tau = np.empty(len(specs)), np.empty(len(specs))
        g = np.empty((len(specs), 6)) if grad else None
        for n, s in enumerate(specs):
            rad[n], tau[n] = rollout_minimum(s, x)
            if grad:
                g[n] = appendix_pair_gradient(s, x, tau[n], outer=False)

    out = PairEvals(i=i, j=j, k=k, value=_map_radicand(rad, sqrt, d_s, pairs), tau_star=tau, radicand_min=rad)
    if grad:
        out.grad6 = _chain_sqrt(rad, sqrt, g, pairs)
        ci, si = np.cos(x[i, 2]), np.sin(x[i, 2])
        cj, sj = np.cos(x[j, 2]), np.sin(x[j, 2])
        gg = out.grad6
        out.lie_g4 = np.stack(
            [gg[:, 0] * ci + gg[:, 1] * si, gg[:, 2], gg[:, 3] * cj + gg[:, 4] * sj, gg[:, 5]], axis=-1
        )
    return out


def _golden_section(f, lo, hi, tol=1e-12, max_iter=200):
    inv_phi = (math.sqrt(5.0) - 1.0) / 2.0
    a, b = lo, hi
    c = b - inv_phi * (b - a)
    d = a + inv_phi * (b - a)
    fc, fd = f(c), f(d)
    for _ in range(max_iter):
        if b - a <= tol * max(1.0, abs(a) + abs(b)):
            break
        if fc < fd:
            b, d, fd = d, c, fc
            c = b - inv_phi * (b - a)
            fc = f(c)
        else:
            a, c, fc = c, d, fd
            d = a + inv_phi * (b - a)
            fd = f(d)
    return (c, fc) if fc < fd else (d, fd)


def default_horizon(spec, x):
    """A rollout length that contains the minimiser."""
    m = spec.maneuver
    if m.kind is ManeuverKind.TURN:
        return m.period()
    if m.kind is ManeuverKind.GENERAL:
        return m.horizon
    i, j = spec.pair
    (vi, _), (vj, _) = m.inputs[i], m.inputs[j]
    dp = np.hypot(x[i, 0] - x[j, 0], x[i, 1] - x[j, 1])
    dw = np.hypot(vi * np.cos(x[i, 2]) - vj * np.cos(x[j, 2]), vi * np.sin(x[i, 2]) - vj * np.sin(x[j, 2]))
    if dw < UNIQUENESS_EPS:
        return 1.0
    # past 2|dp|/|dw| the separation already exceeds the initial one
    return 2.0 * dp / dw + 1.0


def rollout_minimum(spec, x, horizon=None, grid_dt=None):
    """Sample the maneuver rollout on a uniform grid and polish the best sample.

    Returns ``(minimum radicand, minimising time)``; the radicand is the
    (adjusted) squared separation, which ``rho`` maps monotonically.
    """
    x = np.asarray(x, dtype=float)
    i, j = spec.pair
    if horizon is None:
        horizon = default_horizon(spec, x)
    if grid_dt is None:
        grid_dt = horizon * 1e-4
    n = max(2, int(math.ceil(horizon / grid_dt)) + 1)
    taus = np.linspace(0.0, horizon, n)
    ui, uj = spec.maneuver.inputs[i], spec.maneuver.inputs[j]

    def rad_at(t):
        return radicand(spec.safety, analytic_arc(x[i], ui, t), analytic_arc(x[j], uj, t))

    samples = rad_at(taus)
    best = int(np.argmin(samples))
    lo = taus[max(best - 1, 0)]
    hi = taus[min(best + 1, n - 1)]
    t_ref, r_ref = _golden_section(lambda t: float(rad_at(t)), lo, hi)
    if r_ref < samples[best]:
        return float(r_ref), float(t_ref)
    return float(samples[best]), float(taus[best])


def h_numeric_oracle(spec, x, horizon=None, grid_dt=None):
    """``h`` by direct rollout: uniform grid over ``[0, horizon]`` plus golden-section polish."""
    rad, _ = rollout_minimum(spec, x, horizon, grid_dt)
    return float(rho_from_radicand(spec.safety, rad))


def appendix_pair_gradient(spec, x, tau, sensitivity=None, outer=True):
    """Safety gradient at the rollout minimum composed with the flow sensitivity.

    ``sensitivity(pose, u, tau)`` returns ``d pose(tau) / d pose(0)``; the
    closed-form arc Jacobian is the default.  With ``outer=False`` the
    square root of the sqrt variants is left for the caller to apply.
    """
    if sensitivity is None:
        sensitivity = arc_jacobian
    x = np.asarray(x, dtype=float)
    s = spec.safety
    ui, uj = spec.maneuver.inputs[s.i], spec.maneuver.inputs[s.j]
    hat_i = analytic_arc(x[s.i], ui, tau)
    hat_j = analytic_arc(x[s.j], uj, tau)
    drad = radicand_pair_gradient(s, hat_i, hat_j)
    if outer:
        drad = chain_sqrt(s, float(radicand(s, hat_i, hat_j)), drad)
    return np.concatenate([drad[:3] @ sensitivity(x[s.i], ui, tau), drad[3:] @ sensitivity(x[s.j], uj, tau)])


def appendix_gradient(spec, x, tau, sensitivity=None):
    x = np.asarray(x, dtype=float)
    return scatter_pair(spec.safety, x.shape[0], appendix_pair_gradient(spec, x, tau, sensitivity))


def _single(spec, x, grad):
    x = np.asarray(x, dtype=float)
    batch = evaluate_pairs([spec], x, grad=grad)
    out = BarrierEval(value=float(batch.value[0]), tau_star=float(batch.tau_star[0]))
    if grad:
        out.gradient = batch.dense_gradient(0)
        out.lie_f = 0.0
        out.lie_g = batch.dense_lie_g()[0]
    return out


def h_turn_closed_form(spec, x):
    if spec.maneuver.kind is not ManeuverKind.TURN:
        raise InvalidManeuver(f"turn closed form called with a {spec.maneuver.kind.value} maneuver")
    return _single(spec, x, grad=False)


def h_straight_closed_form(spec, x):
    if spec.maneuver.kind is not ManeuverKind.STRAIGHT:
        raise InvalidManeuver(f"straight closed form called with a {spec.maneuver.kind.value} maneuver")
    return _single(spec, x, grad=False)


def h_value(spec, x):
    return _single(spec, x, grad=False).value


def h_gradient(spec, x):
    return _single(spec, x, grad=True).gradient


def lie_from_gradient(gradient, x, drift=None):
    """``(L_f h, L_g h)`` for the unicycle team given ``dh/dx``.

    The team has no drift; ``drift`` is accepted so the formula stays the
    general one.
    """
    x = np.asarray(x, dtype=float)
    g = np.asarray(gradient, dtype=float).reshape(-1, 3)
    lie_f = 0.0 if drift is None else float(np.dot(np.ravel(gradient), np.ravel(drift)))
    lie_g = np.empty(2 * g.shape[0])
    lie_g[0::2] = g[:, 0] * np.cos(x[:, 2]) + g[:, 1] * np.sin(x[:, 2])
    lie_g[1::2] = g[:, 2]
    return lie_f, lie_g


def lie_derivatives(spec, x):
    return lie_from_gradient(h_gradient(spec, x), x)


def evaluate(spec, x):
    """Value, minimising time, gradient and Lie derivatives of one barrier."""
    return _single(spec, x, grad=True)
