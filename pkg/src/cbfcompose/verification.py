"""Independent oracles and the acceptance checks built on them.

Everything here is test scaffolding shared by ``pytest`` and the ``verify``
subcommand.  The oracles deliberately avoid the code paths they check: the
barrier closed forms are compared with a sampled rollout, gradients with
finite differences and the variational equation, the QP solver with an
exhaustive active-set enumeration.
"""

import itertools
import math
import time
from dataclasses import dataclass, field

import numpy as np

from . import barrier as bar
from .dynamics import ControlBounds, integrate_sensitivity
from .errors import Infeasible, NegativeRadicand
from .qp import FEAS_TOL, QpProblem, kkt_residual, solve
from .safety import (
    SafetyFnSpec,
    SafetyKind,
    chain_sqrt,
    radicand,
    radicand_pair_gradient,
    rho_gradient,
    scatter_pair,
)
from .scenario import PRESETS, Mode, reference_bounds, preset
from .supervisor import (
    AlphaFunction,
    build_shared_maneuver_constraints,
    centralized_rows,
    centralized_solve,
    decentralized_rows,
    decentralized_solve,
    evaluate_constraints,
)


@dataclass
class CheckResult:
    name: str
    passed: bool
    detail: str
    elapsed: float = 0.0
    data: dict = field(default_factory=dict, repr=False)

    def line(self):
        status = "PASS" if self.passed else "FAIL"
        return f"[{status}] {self.name}: {self.detail} ({self.elapsed:.2f} s)"


def _timed(fn):
    def wrapper(*args, **kw):
        started = time.perf_counter()
        res = fn(*args, **kw)
        res.elapsed = time.perf_counter() - started
        return res

    wrapper.__name__ = fn.__name__
    wrapper.__doc__ = fn.__doc__
    return wrapper


# -- oracles -----------------------------------------------------------------


def finite_difference_gradient(f, x, step=1e-6):
    """Central differences of scalar ``f`` over every entry of ``x``."""
    x = np.asarray(x, dtype=float)
    out = np.empty(x.size)
    for n in range(x.size):
        e = np.zeros(x.size)
        e[n] = step
        e = e.reshape(x.shape)
        out[n] = (f(x + e) - f(x - e)) / (2.0 * step)
    return out


def variational_gradient(spec, x, tau, steps=400):
    """``d rho / d x_hat(tau)`` composed with RK4-integrated poses and sensitivities.

    Neither the closed-form arc nor its Jacobian is used.
    """
    x = np.asarray(x, dtype=float)
    s = spec.safety
    hat_i, jac_i = integrate_sensitivity(x[s.i], spec.maneuver.inputs[s.i], tau, steps)
    hat_j, jac_j = integrate_sensitivity(x[s.j], spec.maneuver.inputs[s.j], tau, steps)
    drad = radicand_pair_gradient(s, hat_i, hat_j)
    drad = chain_sqrt(s, float(radicand(s, hat_i, hat_j)), drad)
    return scatter_pair(s, x.shape[0], np.concatenate([drad[:3] @ jac_i, drad[3:] @ jac_j]))


def enumerate_projection(problem, tol=1e-9):
    """Projection of ``u_hat`` onto ``{G u >= d}`` by trying every active set of size <= m.

    The projection is the affine projection onto some face; faces with
    dependent normals are reached through an independent subset, so
    checking subsets up to the dimension is enough.  Returns ``None`` if no
    candidate is feasible.
    """
    g, d, u_hat = problem.g_matrix, problem.d_vector, problem.u_hat
    m, r = g.shape[1], g.shape[0]
    best = None
    for size in range(0, m + 1):
        for act in itertools.combinations(range(r), size):
            if act:
                n = g[list(act)]
                gram = n @ n.T
                if np.linalg.matrix_rank(gram) < size:
                    continue
                lam = np.linalg.solve(gram, d[list(act)] - n @ u_hat)
                u = u_hat + n.T @ lam
            else:
                u = u_hat
            if np.all(g @ u - d >= -tol):
                dist = float(np.sum((u - u_hat) ** 2))
                if best is None or dist < best[0] - 1e-14:
                    best = (dist, u)
    return None if best is None else best[1]


def random_feasible_problem(rng, m=None, r=None):
    m = int(rng.integers(1, 5)) if m is None else m
    r = int(rng.integers(1, 13)) if r is None else r
    g = rng.normal(size=(r, m))
    inside = rng.normal(size=m)
    d = g @ inside - rng.uniform(0.0, 1.0, r)
    return QpProblem(3.0 * rng.normal(size=m), g, d)


def random_infeasible_problem(rng, m=None, r=None):
    """Problem with a Farkas certificate ``y >= 0, y^T G = 0, y^T d > 0``."""
    m = int(rng.integers(1, 5)) if m is None else m
    r = int(rng.integers(2, 13)) if r is None else r
    g = rng.normal(size=(r, m))
    support = rng.choice(r, size=int(rng.integers(2, r + 1)), replace=False)
    y = np.zeros(r)
    y[support] = rng.uniform(0.2, 2.0, support.size)
    last = support[-1]
    rest = support[:-1]
    g[last] = -(y[rest] @ g[rest]) / y[last]
    d = rng.normal(size=r)
    d[last] = (rng.uniform(0.1, 1.0) - y[rest] @ d[rest]) / y[last]
    return QpProblem(3.0 * rng.normal(size=m), g, d), y


def grid_points(bounds, n=50):
    v = np.linspace(bounds.v_min, bounds.v_max, n)
    w = np.linspace(-bounds.omega_max, bounds.omega_max, n)
    return np.array(list(itertools.product(v, w)))


# -- shared fixtures ----------------------------------------------------------


def reference_turn_maneuver(sigma=(1.1, 1.0)):
    b = reference_bounds()
    return bar.EvadingManeuver.turn(0.9 * b.v_min + 0.1 * b.v_max, 0.9 * b.omega_max, list(sigma))


def reference_straight_maneuver():
    b = reference_bounds()
    v = 0.9 * b.v_min + 0.1 * b.v_max
    return bar.EvadingManeuver.straight([1.1 * v, v])


def pair_spec(kind, maneuver, d_s=5.0, delta=0.01, i=0, j=1):
    return bar.BarrierSpec(SafetyFnSpec(kind, i, j, d_s, delta), maneuver)


def random_pair_state(rng, scale=150.0):
    return np.column_stack([rng.uniform(-scale, scale, 2), rng.uniform(-scale, scale, 2), rng.uniform(-math.pi, math.pi, 2)])


def random_safe_team(rng, cs, max_tries=10000):
    """Uniform pose sample with every barrier non-negative (rejection sampling)."""
    k = cs.k
    for _ in range(max_tries):
        scale = rng.uniform(40.0, 150.0) * math.sqrt(k)
        x = np.column_stack([rng.uniform(-scale, scale, k), rng.uniform(-scale, scale, k), rng.uniform(-math.pi, math.pi, k)])
        try:
            ev = evaluate_constraints(cs, x)
        except (NegativeRadicand, bar.NonUniqueMinimizer):
            continue
        if np.all(ev.value >= 0):
            return x, ev
    raise RuntimeError("could not sample a safe team state")


# -- acceptance checks --------------------------------------------------------


@_timed
def check_euclidean_candidate(d_s=5.0, v_min=15.0):
    """Direct squared distance used as a barrier at a head-on touching pair."""
    bounds = ControlBounds(v_min, v_min + 10.0, math.radians(13.0))
    spec = SafetyFnSpec(SafetyKind.EUCLIDEAN_SQ, 0, 1, d_s)
    x = np.array([[-d_s / 2.0, 0.0, 0.0], [d_s / 2.0, 0.0, math.pi]])
    _, lie_g = bar.lie_from_gradient(rho_gradient(spec, x), x)
    # the row is linear in u, so its supremum over the box sits at a corner
    corners = np.array(list(itertools.product(*[(bounds.v_min, bounds.v_max), (-bounds.omega_max, bounds.omega_max)] * 2)))
    sup = float(np.max(corners @ lie_g))
    expected = -4.0 * d_s * v_min
    ok = abs(sup - expected) <= 1e-9
    return CheckResult("1 euclidean candidate", ok, f"sup L_g rho u = {sup!r}, expected {expected!r}", data={"sup": sup})


@_timed
def check_closed_form_vs_rollout(n=1000, seed=0):
    rng = np.random.default_rng(seed)
    cases = [
        ("turn", pair_spec(SafetyKind.ADJUSTED_SQRT, reference_turn_maneuver()), 1e-4),
        ("straight", pair_spec(SafetyKind.PLAIN_SQRT, reference_straight_maneuver()), 1e-6),
    ]
    errs = {}
    for label, spec, _ in cases:
        worst, done = 0.0, 0
        while done < n:
            x = random_pair_state(rng)
            try:
                ev = bar.h_turn_closed_form(spec, x) if label == "turn" else bar.h_straight_closed_form(spec, x)
            except NegativeRadicand:
                continue
            if label == "turn":
                horizon = spec.maneuver.period()
                oracle = bar.h_numeric_oracle(spec, x, horizon, 1e-4 * horizon)
            else:
                horizon = 10.0 * ev.tau_star + 1.0
                oracle = bar.h_numeric_oracle(spec, x, horizon, 1e-4 * horizon)
            worst = max(worst, abs(ev.value - oracle))
            done += 1
        errs[label] = worst
    ok = all(errs[label] <= tol for label, _, tol in cases)
    detail = ", ".join(f"{label} max err {errs[label]:.2e} (tol {tol:g})" for label, _, tol in cases)
    return CheckResult("2 closed form vs rollout", ok, detail, data=errs)


def _relative(a, b):
    return float(np.max(np.abs(a - b)) / max(1.0, np.max(np.abs(b))))


@_timed
def check_gradients(n_fd=500, n_var=100, seed=1):
    """Closed-form gradient against finite differences and the variational equation.

    Relative error is ``max|g - ref| / max(1, max|ref|)``.
    """
    rng = np.random.default_rng(seed)
    specs = [
        pair_spec(SafetyKind.ADJUSTED_SQRT, reference_turn_maneuver()),
        pair_spec(SafetyKind.PLAIN_SQRT, reference_straight_maneuver()),
    ]
    fd_err, var_err = 0.0, 0.0
    for spec in specs:
        done = 0
        while done < n_fd:
            x = random_pair_state(rng)
            try:
                ev = bar.evaluate(spec, x)
            except (NegativeRadicand, bar.NonUniqueMinimizer):
                continue
            if ev.value < 0:
                continue
            fd = finite_difference_gradient(lambda y: bar.h_value(spec, y), x)
            fd_err = max(fd_err, _relative(ev.gradient, fd))
            if done < n_var:
                var_err = max(var_err, _relative(ev.gradient, variational_gradient(spec, x, ev.tau_star)))
            done += 1
    ok = fd_err <= 1e-4 and var_err <= 1e-6
    detail = f"finite differences {fd_err:.2e} (tol 1e-4), variational {var_err:.2e} (tol 1e-6)"
    return CheckResult("3 gradient", ok, detail, data={"fd": fd_err, "variational": var_err})


# three-vehicle configuration where separately chosen maneuvers conflict
CEX_R = 1.0
CEX_DS = 0.5
CEX_DELTA = 1e-9
CEX_BOUNDS = ControlBounds(1.0, 2.0, 1.0)
CEX_COEFF = 0.4
CEX_MIXED = ((1.0, 1.0), (1.5, 0.0), (2.0, -1.0))


def counterexample_state(r=CEX_R, d_s=CEX_DS):
    psi = math.acos((d_s / 2.0 + 2.0 * r) / (2.0 * r + d_s))
    a = 2.0 * r + d_s
    return np.array(
        [
            [0.0, 0.0, 0.0],
            [a * math.sin(psi), a * math.cos(psi) - 2.0 * r, math.pi],
            [a * math.sin(psi), 2.0 * r - a * math.cos(psi), math.pi],
        ]
    )


def _cex_spec(i, j, maneuver, kind):
    return bar.BarrierSpec(SafetyFnSpec(kind, i, j, CEX_DS, CEX_DELTA), maneuver)


def counterexample_facts(kind=SafetyKind.ADJUSTED_SQ, grid_n=50):
    """Evaluate every claim about the three-vehicle configuration.

    Pair (1, 2) uses an all-right turn, pairs (1, 3) and (2, 3) an all-left
    turn.  Returns a dict of raw numbers; judging them is left to callers.
    """
    x = counterexample_state()
    right = bar.EvadingManeuver.turn(1.0, -1.0, [1.0, 1.0, 1.0])
    left = bar.EvadingManeuver.turn(1.0, 1.0, [1.0, 1.0, 1.0])
    alpha = AlphaFunction(1.0)
    own = [((0, 1), right), ((0, 2), left), ((1, 2), left)]
    evals = [bar.evaluate(_cex_spec(i, j, m, kind), x) for (i, j), m in own]
    rows = np.array([e.lie_g for e in evals[:2]])
    rhs = np.array([-e.lie_f - alpha(e.value) for e in evals[:2]])

    expected_rows = CEX_COEFF * np.array([[-1, -1, -1, -1, 0, 0], [-1, 1, 0, 0, -1, 1]], dtype=float)
    scale = [float(np.dot(r, e) / np.dot(e, e)) for r, e in zip(rows, expected_rows)]
    scaled_err = max(float(np.max(np.abs(r - s * e))) for r, s, e in zip(rows, scale, expected_rows))

    a, b = CEX_BOUNDS.stacked_polytope(3)
    u_hat = np.tile([1.5, 0.0], 3)
    try:
        solve(QpProblem(u_hat, np.vstack([rows, a]), np.concatenate([rhs, b])))
        qp_infeasible = False
    except Infeasible:
        qp_infeasible = True

    # rows couple (u1, u2) and (u1, u3) only, so for every u1 on the grid the
    # remaining search splits into two independent 2-D grids
    pts = grid_points(CEX_BOUNDS, grid_n)
    grid_hits = 0
    for u1 in pts:
        ok2 = np.any(rows[0, :2] @ u1 + pts @ rows[0, 2:4] >= rhs[0] - FEAS_TOL)
        ok3 = np.any(rows[1, :2] @ u1 + pts @ rows[1, 4:6] >= rhs[1] - FEAS_TOL)
        grid_hits += int(ok2 and ok3)

    shared = {}
    for label, m in [("left", left), ("mixed", bar.EvadingManeuver.general(CEX_MIXED, horizon=60.0))]:
        cs = build_shared_maneuver_constraints(3, kind, m, CEX_DS, CEX_DELTA)
        ev = evaluate_constraints(cs, x)
        rate = ev.lie_f + ev.dense_lie_g() @ m.stacked()
        shared[label] = {"h": ev.value.tolist(), "rate": rate.tolist()}

    return {
        "h": [e.value for e in evals],
        "rows": rows,
        "rhs": rhs,
        "coeff": float(np.max(np.abs(rows))),
        "coeff_err": float(np.max(np.abs(rows - expected_rows))),
        "scale": scale,
        "scaled_err": scaled_err,
        "qp_infeasible": qp_infeasible,
        "grid_hits": grid_hits,
        "grid_n": grid_n,
        "shared": shared,
    }


def counterexample_checks(facts, rate_tol=1e-7):
    """Split the facts into named pass/fail items."""
    shared_ok = all(min(v["rate"]) >= -rate_tol for v in facts["shared"].values())
    return {
        "zero barriers": max(abs(h) for h in facts["h"]) <= 1e-6,
        "rows match +-0.4": facts["coeff_err"] <= 1e-6,
        "rows match up to positive scale": facts["scaled_err"] <= 1e-6 and min(facts["scale"]) > 0,
        "non-shared QP infeasible": facts["qp_infeasible"] and facts["grid_hits"] == 0,
        "shared maneuver keeps rate": shared_ok,
    }


@_timed
def check_counterexample():
    facts = counterexample_facts()
    items = counterexample_checks(facts)
    failed = [k for k, v in items.items() if not v]
    detail = (
        f"h = {np.round(facts['h'], 9).tolist()}, row coefficient {facts['coeff']:.7f}, "
        f"QP infeasible {facts['qp_infeasible']}, grid hits {facts['grid_hits']}/{facts['grid_n'] ** 2}"
    )
    if failed:
        detail += f"; failed: {', '.join(failed)}"
    return CheckResult("4 three-vehicle counterexample", not failed, detail, data={"facts": facts, "items": items})


def fuzz_decentralized(n_states=10000, sizes=(2, 3, 5), seed=2):
    """Per-state soundness and conservatism numbers for random safe team states.

    States alternate between a shared turn and a shared straight maneuver.
    """
    rng = np.random.default_rng(seed)
    bounds = reference_bounds()
    alpha = AlphaFunction(1.0)
    v = 0.9 * bounds.v_min + 0.1 * bounds.v_max
    sets = {}
    for k in sizes:
        turn = bar.EvadingManeuver.turn(v, 0.9 * bounds.omega_max, [1.0 + 0.02 * i for i in range(k)])
        straight = bar.EvadingManeuver.straight([(1 + 0.01 * (i + 1)) * v for i in range(k)])
        sets[k] = [
            build_shared_maneuver_constraints(k, SafetyKind.ADJUSTED_SQRT, turn, 5.0, 0.01),
            build_shared_maneuver_constraints(k, SafetyKind.PLAIN_SQRT, straight, 5.0),
        ]
    gamma_slack = np.inf
    cap_slack = np.inf
    gaps = []
    for n in range(n_states):
        k = sizes[n % len(sizes)]
        cs = sets[k][(n // len(sizes)) % 2]
        x, ev = random_safe_team(rng, cs)
        gamma = cs.maneuver.stacked()
        u_hat = np.column_stack([rng.uniform(bounds.v_min, bounds.v_max, k), rng.uniform(-bounds.omega_max, bounds.omega_max, k)])
        u_dec = np.empty((k, 2))
        for i in range(k):
            gi, di = decentralized_rows(ev, cs, alpha, i, gamma)
            gamma_slack = min(gamma_slack, float(np.min(gi @ gamma[2 * i : 2 * i + 2] - di)))
            mine = [j for j in range(cs.q) if i in cs.zeta[j]]
            sub = _subset(ev, mine)
            u_dec[i] = decentralized_solve(cs, alpha, x, u_hat[i], i, bounds, sub).u_star
        g, d = centralized_rows(ev, alpha)
        cap_slack = min(cap_slack, float(np.min(g @ u_dec.ravel() - d)))
        u_cen = centralized_solve(cs, alpha, x, u_hat, bounds, ev).u_star
        gaps.append(float(np.sum((u_dec - u_hat) ** 2) - np.sum((u_cen - u_hat.ravel()) ** 2)))
    return {"gamma_slack": gamma_slack, "cap_slack": cap_slack, "gaps": np.array(gaps)}


def _subset(ev, rows):
    rows = np.asarray(rows, dtype=int)
    out = bar.PairEvals(
        i=ev.i[rows], j=ev.j[rows], k=ev.k, value=ev.value[rows], tau_star=ev.tau_star[rows],
        radicand_min=ev.radicand_min[rows], grad6=ev.grad6[rows], lie_g4=ev.lie_g4[rows],
    )
    out.index = ev.index[rows]
    return out


def worked_contrast():
    """Two vehicles, one constraint with ``[L_g h]_1 gamma_1 = 1`` and ``[L_g h]_2 gamma_2 = -1``.

    Returns ``(centralized slack at u_1 = 0, decentralized slack at u_1 = 0)``.
    """
    lie_g = np.array([1.0, 0.0, -1.0, 0.0])
    gamma = np.array([1.0, 0.0, 1.0, 0.0])
    u = np.zeros(4)
    ev = bar.PairEvals(i=np.array([0]), j=np.array([1]), k=2, value=np.zeros(1), tau_star=np.zeros(1),
                       radicand_min=np.zeros(1), lie_g4=lie_g[None, :])
    ev.index = np.array([0])
    cs = build_shared_maneuver_constraints(2, SafetyKind.EUCLIDEAN_SQ, bar.EvadingManeuver.straight([1.0, 2.0]), 1.0)
    zero = AlphaFunction(1.0)
    g, d = centralized_rows(ev, zero)
    gi, di = decentralized_rows(ev, cs, zero, 0, gamma)
    return float(g[0] @ u - d[0]), float(gi[0] @ u[:2] - di[0])


@_timed
def check_decentralized_soundness(fuzz=None, n_states=10000):
    fuzz = fuzz_decentralized(n_states) if fuzz is None else fuzz
    ok = fuzz["gamma_slack"] >= -1e-9 and fuzz["cap_slack"] >= -1e-8
    detail = f"min maneuver slack {fuzz['gamma_slack']:.3e}, min centralized-row slack {fuzz['cap_slack']:.3e} over {len(fuzz['gaps'])} states"
    return CheckResult("5 decentralized soundness", ok, detail, data=fuzz)


@_timed
def check_conservatism(fuzz=None, n_states=10000):
    fuzz = fuzz_decentralized(n_states) if fuzz is None else fuzz
    gaps = fuzz["gaps"]
    cen_slack, dec_slack = worked_contrast()
    ok = gaps.min() >= -1e-8 and gaps.max() >= 1e-3 and cen_slack >= 0 > dec_slack
    detail = (
        f"min gap {gaps.min():.3e}, max gap {gaps.max():.3e}, strict on {int(np.sum(gaps >= 1e-3))} states; "
        f"worked contrast slack centralized {cen_slack:g}, decentralized {dec_slack:g}"
    )
    return CheckResult("8 decentralized conservatism", ok, detail)


def run_preset(name, mode, **overrides):
    from .sim import run

    cfg = preset(name).with_overrides(mode=Mode(mode), **overrides)
    return cfg, run(cfg)


@_timed
def check_forward_invariance(names=None, modes=("centralized", "decentralized"), budget=120.0):
    names = list(PRESETS) if names is None else names
    bad, lines = [], []
    for name in names:
        for mode in modes:
            cfg, (records, summary) = run_preset(name, mode)
            expected = int(math.floor(cfg.t_end / cfg.dt + 1e-9)) + 1
            ok = (
                summary.clean
                and summary.steps == expected
                and summary.min_pair_distance >= cfg.d_s
                and summary.actuator_violation_count == 0
                and summary.wall_time < budget
            )
            lines.append(
                f"{name}/{mode}: min distance {summary.min_pair_distance:.4f} m, min h {summary.min_h:.4g}, "
                f"{summary.wall_time:.1f} s" + ("" if summary.clean else f", halted: {summary.error}")
            )
            if not ok:
                bad.append(f"{name}/{mode}")
    detail = "; ".join(lines)
    return CheckResult("6 forward invariance", not bad, detail, data={"failed": bad})


@_timed
def check_qp_oracle(n=1000, n_infeasible=300, seed=3):
    rng = np.random.default_rng(seed)
    worst, kkt = 0.0, 0.0
    for _ in range(n):
        p = random_feasible_problem(rng)
        sol = solve(p)
        ref = enumerate_projection(p)
        worst = max(worst, float(np.max(np.abs(sol.u_star - ref))))
        kkt = max(kkt, kkt_residual(p, sol))
    missed = 0
    for _ in range(n_infeasible):
        p, _ = random_infeasible_problem(rng)
        try:
            solve(p)
            missed += 1
        except Infeasible:
            pass
    ok = worst <= 1e-6 and kkt <= 1e-9 and missed == 0
    detail = f"max |u - oracle| {worst:.2e}, max KKT residual {kkt:.2e}, missed infeasible {missed}/{n_infeasible}"
    return CheckResult("7 QP oracle", ok, detail)


def run_all(progress=None, quick=False):
    """Every acceptance check in order; ``progress`` gets each result as it lands."""
    n_fuzz = 600 if quick else 10000
    results = []

    def emit(res):
        results.append(res)
        if progress:
            progress(res)

    emit(check_euclidean_candidate())
    emit(check_closed_form_vs_rollout(200 if quick else 1000))
    emit(check_gradients(100 if quick else 500, 30 if quick else 100))
    emit(check_counterexample())
    started = time.perf_counter()
    fuzz = fuzz_decentralized(n_fuzz)
    fuzz_time = time.perf_counter() - started
    c5 = check_decentralized_soundness(fuzz)
    c5.elapsed += fuzz_time
    emit(c5)
    emit(check_forward_invariance(names=["paper-2veh-turn", "paper-2veh-straight"] if quick else None))
    emit(check_qp_oracle(200 if quick else 1000))
    c8 = check_conservatism(fuzz)
    c8.elapsed += fuzz_time
    emit(c8)
    return results
