"""Scenario construction: vehicles on a circle flying to the antipodal point."""

import enum
import math
from dataclasses import dataclass, field, replace

import numpy as np

from .barrier import EvadingManeuver
from .dynamics import ControlBounds, ControlInput
from .errors import CbfError, ConfigError, UnsafeStart
from .safety import SafetyKind
from .supervisor import AlphaFunction, build_shared_maneuver_constraints, evaluate_constraints


class Mode(enum.Enum):
    CENTRALIZED = "centralized"
    DECENTRALIZED = "decentralized"


@dataclass(frozen=True)
class ScenarioConfig:
    k: int
    radius: float
    psi: float  # radians
    bounds: ControlBounds
    d_s: float
    delta: float
    alpha: AlphaFunction
    maneuver: EvadingManeuver
    safety_kind: SafetyKind
    dt: float = 0.02
    t_end: float = 40.0
    mode: Mode = Mode.CENTRALIZED
    lam: float = 1.0
    kp: float = 1.0
    fallback_maneuver: bool = False
    name: str = "custom"

    def validate(self):
        if self.k < 2:
            raise ConfigError(f"k must be at least 2, got {self.k}")
        if not self.dt > 0:
            raise ConfigError(f"dt must be positive, got {self.dt}")
        if not self.t_end >= 0:
            raise ConfigError(f"t_end must be non-negative, got {self.t_end}")
        if not self.radius > 0:
            raise ConfigError(f"radius must be positive, got {self.radius}")
        if not self.d_s > 0:
            raise ConfigError(f"d_s must be positive, got {self.d_s}")
        if not self.lam > 0:
            raise ConfigError(f"lambda must be positive, got {self.lam}")
        if self.maneuver.k != self.k:
            raise ConfigError(f"maneuver covers {self.maneuver.k} vehicles, scenario has {self.k}")
        try:
            self.maneuver.check_interior(self.bounds)
        except CbfError as exc:
            raise ConfigError(str(exc)) from exc
        return self

    def constraints(self):
        return build_shared_maneuver_constraints(self.k, self.safety_kind, self.maneuver, self.d_s, self.delta)

    def with_overrides(self, **kw):
        return replace(self, **{k: v for k, v in kw.items() if v is not None})


@dataclass(frozen=True)
class GoalSpec:
    goals: np.ndarray = field(repr=False)  # (k, 2)


def reference_bounds():
    return ControlBounds(v_min=15.0, v_max=25.0, omega_max=math.radians(13.0))


def preset_maneuver(kind, k, bounds):
    v = 0.9 * bounds.v_min + 0.1 * bounds.v_max
    omega = 0.9 * bounds.omega_max
    if kind == "turn":
        sigma = [1.1, 1.0] if k == 2 else [1.0] * k
        return EvadingManeuver.turn(v, omega, sigma)
    if k == 2:
        return EvadingManeuver.straight([1.1 * v, v])
    return EvadingManeuver.straight([(1 + 0.01 * i) * v for i in range(1, k + 1)])


def _preset(k, kind, psi_deg):
    bounds = reference_bounds()
    return ScenarioConfig(
        k=k,
        radius=200.0,
        psi=math.radians(psi_deg),
        bounds=bounds,
        d_s=5.0,
        delta=0.01,
        alpha=AlphaFunction(1.0),
        maneuver=preset_maneuver(kind, k, bounds),
        safety_kind=SafetyKind.ADJUSTED_SQRT if kind == "turn" else SafetyKind.PLAIN_SQRT,
        name=f"paper-{k}veh-{kind}",
    )


PRESETS = {
    "paper-2veh-turn": lambda: _preset(2, "turn", 0.0),
    "paper-2veh-straight": lambda: _preset(2, "straight", 2.0),
    "paper-20veh-turn": lambda: _preset(20, "turn", 0.0),
    "paper-20veh-straight": lambda: _preset(20, "straight", 25.0),
}


def preset(name):
    try:
        return PRESETS[name]()
    except KeyError:
        raise ConfigError(f"unknown preset {name!r}; available: {', '.join(PRESETS)}") from None


def circle_poses(k, radius, psi):
    """Vehicle ``i`` (1-based) sits at angle ``2 pi i / k + pi`` and heads at ``2 pi i / k + psi``."""
    ang = 2.0 * math.pi * np.arange(1, k + 1) / k
    x = np.column_stack([radius * np.cos(ang + math.pi), radius * np.sin(ang + math.pi), ang + psi])
    goals = np.column_stack([radius * np.cos(ang), radius * np.sin(ang)])
    return x, goals


def build_circle_scenario(cfg):
    """Initial team state and goals; refuses a start outside the safe set."""
    cfg.validate()
    x, goals = circle_poses(cfg.k, cfg.radius, cfg.psi)
    try:
        h = evaluate_constraints(cfg.constraints(), x, grad=False).value
    except CbfError as exc:
        raise UnsafeStart(f"barriers cannot be evaluated at the start: {exc}") from exc
    if min(h) < 0:
        raise UnsafeStart(
            f"{cfg.name}: initial state is outside the safe set (min h = {min(h):.4g}); "
            "increase psi or change the maneuver"
        )
    return x, GoalSpec(goals)


def nominal_controller(state, goal, bounds, lam=1.0, kp=1.0):
    """Go-to-goal law on the point ``lam`` ahead of the vehicle, saturated to the bounds."""
    px, py, th = state
    c, s = math.cos(th), math.sin(th)
    wx = kp * (goal[0] - (px + lam * c))
    wy = kp * (goal[1] - (py + lam * s))
    v = c * wx + s * wy
    omega = (-s * wx + c * wy) / lam
    v = min(max(v, bounds.v_min), bounds.v_max)
    omega = min(max(omega, -bounds.omega_max), bounds.omega_max)
    return ControlInput(v, omega)


def nominal_inputs(x, goals, cfg):
    return np.array([nominal_controller(x[i], goals.goals[i], cfg.bounds, cfg.lam, cfg.kp) for i in range(cfg.k)])
