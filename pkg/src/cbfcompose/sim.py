"""Fixed-step closed-loop simulation with a safety filter in the loop."""

import csv
import itertools
import logging
import math
import os
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .dynamics import integrate_rk4
from .errors import CbfError, Infeasible, IterationLimit
from .qp import FEAS_TOL
from .scenario import Mode, build_circle_scenario, nominal_inputs
from .supervisor import (
    admissible_membership,
    centralized_solve,
    decentralized_solve,
    evaluate_constraints,
)

log = logging.getLogger(__name__)


@dataclass
class StepRecord:
    t: float
    poses: np.ndarray  # (k, 3)
    nominal: np.ndarray  # (k, 2)
    filtered: np.ndarray  # (k, 2)
    distances: np.ndarray  # (q,), pair order of itertools.combinations
    h: np.ndarray  # (q,)
    qp_iterations: list
    fallback: list = field(default_factory=list)  # vehicles that flew the maneuver this step


@dataclass
class RunSummary:
    scenario: str
    mode: str
    steps: int
    min_pair_distance: float
    min_h: float
    actuator_violation_count: int
    infeasible_count: int
    fallback_count: int
    wall_time: float
    error: str = None

    @property
    def clean(self):
        return self.error is None


def worker_count():
    env = os.environ.get("CBF_THREADS")
    if env:
        return max(1, int(env))
    return os.cpu_count() or 1


def _pairs(k):
    return list(itertools.combinations(range(k), 2))


def _filter_step(cfg, cs, x, u_hat, pool):
    """Filtered inputs, QP iteration counts and fallback vehicles for one snapshot."""
    k = cfg.k
    gamma = cs.maneuver.as_array()
    if cfg.mode is Mode.CENTRALIZED:
        try:
            sol = centralized_solve(cs, cfg.alpha, x, u_hat, cfg.bounds)
        except (Infeasible, IterationLimit):
            if not cfg.fallback_maneuver:
                raise
            return gamma.copy(), [0], list(range(k))
        return sol.u_star.reshape(k, 2), [sol.iterations], []

    def one(i):
        try:
            sol = decentralized_solve(cs, cfg.alpha, x, u_hat[i], i, cfg.bounds)
        except (Infeasible, IterationLimit):
            if not cfg.fallback_maneuver:
                raise
            return gamma[i].copy(), 0, True
        return sol.u_star, sol.iterations, False

    results = list(pool.map(one, range(k))) if pool else [one(i) for i in range(k)]
    u = np.array([r[0] for r in results])
    return u, [r[1] for r in results], [i for i, r in enumerate(results) if r[2]]


def run(cfg, threads=None):
    """Simulate ``cfg`` from its circle start; always returns what was logged.

    A safety or feasibility failure stops the loop and is reported in
    ``summary.error`` rather than raised.
    """
    started = time.perf_counter()
    x, goals = build_circle_scenario(cfg)
    cs = cfg.constraints()
    pairs = _pairs(cfg.k)
    n_steps = int(math.floor(cfg.t_end / cfg.dt + 1e-9))
    threads = worker_count() if threads is None else threads
    pool = ThreadPoolExecutor(threads) if threads > 1 and cfg.mode is Mode.DECENTRALIZED else None
    records, error, infeasible = [], None, 0
    try:
        for n in range(n_steps + 1):
            t = n * cfg.dt
            snapshot = x.copy()
            u_hat = nominal_inputs(snapshot, goals, cfg)
            try:
                u, iters, fallback = _filter_step(cfg, cs, snapshot, u_hat, pool)
            except CbfError as exc:
                if isinstance(exc, (Infeasible, IterationLimit)):
                    infeasible += 1
                error = f"t={t:.4f}: {type(exc).__name__}: {exc}"
                log.error("run halted at %s", error)
                break
            infeasible += bool(fallback)
            h = evaluate_constraints(cs, snapshot, grad=False).value
            dist = np.array([math.hypot(*(snapshot[i, :2] - snapshot[j, :2])) for i, j in pairs])
            records.append(StepRecord(t, snapshot, u_hat, u, dist, h, iters, fallback))
            if n < n_steps:
                x = integrate_rk4(snapshot, u, cfg.dt)
    finally:
        if pool:
            pool.shutdown()
    return records, summarize(cfg, records, error, infeasible, time.perf_counter() - started)


def summarize(cfg, records, error=None, infeasible=0, wall_time=0.0):
    if records:
        min_d = float(min(r.distances.min() for r in records))
        min_h = float(min(r.h.min() for r in records))
    else:
        min_d = min_h = math.nan
    bad_u = sum(
        int(not cfg.bounds.contains(ui)) for r in records for ui in r.filtered
    )
    return RunSummary(
        scenario=cfg.name,
        mode=cfg.mode.value,
        steps=len(records),
        min_pair_distance=min_d,
        min_h=min_h,
        actuator_violation_count=bad_u,
        infeasible_count=infeasible,
        fallback_count=sum(len(r.fallback) for r in records),
        wall_time=wall_time,
        error=error,
    )


@dataclass
class Violation:
    t: float
    kind: str  # "actuator" or "barrier"
    detail: str


def audit(records, cfg):
    """Re-check every logged filtered input against the actuator box and the barrier rows."""
    cs = cfg.constraints()
    found = []
    for r in records:
        rep = admissible_membership(cs, cfg.alpha, r.poses, r.filtered, cfg.bounds)
        for i, ok in enumerate(rep.actuator):
            if not ok:
                found.append(Violation(r.t, "actuator", f"vehicle {i} input {r.filtered[i].tolist()}"))
        g_ok = [c or not all(rep.actuator[v] for v in cs.zeta[j]) for j, c in enumerate(rep.centralized)]
        for j, ok in enumerate(g_ok):
            if not ok:
                i, jj = cs.barriers[j].pair
                found.append(Violation(r.t, "barrier", f"pair ({i}, {jj}) row below -{FEAS_TOL:g}"))
    return found


TRAJECTORY_HEADER = ["t", "vehicle", "px", "py", "theta", "v_nominal", "omega_nominal", "v", "omega", "qp_iterations", "fallback"]
PAIR_HEADER = ["t", "i", "j", "distance", "h"]


def _fmt(v):
    return repr(float(v))


def write_trajectory_csv(records, path):
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(TRAJECTORY_HEADER)
        for r in records:
            per_vehicle_iters = len(r.qp_iterations) == len(r.poses)
            for i, (pose, un, uf) in enumerate(zip(r.poses, r.nominal, r.filtered)):
                it = r.qp_iterations[i] if per_vehicle_iters else r.qp_iterations[0]
                w.writerow([_fmt(r.t), i, *map(_fmt, pose), *map(_fmt, un), *map(_fmt, uf), it, int(i in r.fallback)])


def write_pairs_csv(records, path):
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(PAIR_HEADER)
        for r in records:
            k = len(r.poses)
            for (i, j), d, h in zip(_pairs(k), r.distances, r.h):
                w.writerow([_fmt(r.t), i, j, _fmt(d), _fmt(h)])
