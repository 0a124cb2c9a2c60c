"""Barrier-function safety filters for teams of actuator-limited unicycles."""

from .barrier import BarrierSpec, EvadingManeuver, ManeuverKind, evaluate, evaluate_pairs, h_gradient, h_value
from .dynamics import ControlBounds, ControlInput, VehicleState
from .errors import CbfError
from .qp import QpProblem, solve
from .safety import SafetyFnSpec, SafetyKind
from .scenario import Mode, ScenarioConfig, preset
from .supervisor import AlphaFunction, build_shared_maneuver_constraints, centralized_filter, decentralized_filter

__version__ = "0.1.0"

__all__ = [
    "AlphaFunction",
    "BarrierSpec",
    "CbfError",
    "ControlBounds",
    "ControlInput",
    "EvadingManeuver",
    "ManeuverKind",
    "Mode",
    "QpProblem",
    "SafetyFnSpec",
    "SafetyKind",
    "ScenarioConfig",
    "VehicleState",
    "build_shared_maneuver_constraints",
    "centralized_filter",
    "decentralized_filter",
    "evaluate",
    "evaluate_pairs",
    "h_gradient",
    "h_value",
    "preset",
    "solve",
]
