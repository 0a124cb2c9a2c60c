"""Unicycle kinematics for a team of fixed-wing vehicles flying in the plane.

A single vehicle has pose ``(px, py, theta)`` and input ``(v, omega)``.  A
team is a ``(k, 3)`` array of poses with a matching ``(k, 2)`` array of
inputs; row ``i`` always belongs to vehicle ``i``.  Headings are never
wrapped, every consumer goes through ``sin``/``cos``.
"""

from dataclasses import dataclass
from typing import NamedTuple

import numpy as np

from .errors import ConfigError

#: below this turn rate an arc is treated as a straight segment
STRAIGHT_EPS = 1e-12


class VehicleState(NamedTuple):
    px: float
    py: float
    theta: float


class ControlInput(NamedTuple):
    v: float
    omega: float


@dataclass(frozen=True)
class ControlBounds:
    """Box limits on speed and turn rate, identical for every vehicle."""

    v_min: float
    v_max: float
    omega_max: float

    def __post_init__(self):
        vals = (self.v_min, self.v_max, self.omega_max)
        if not all(np.isfinite(vals)):
            raise ConfigError(f"control bounds must be finite, got {vals}")
        if self.v_min <= 0:
            raise ConfigError(f"v_min must be strictly positive, got {self.v_min}")
        if self.v_max < self.v_min:
            raise ConfigError(f"v_max={self.v_max} is below v_min={self.v_min}")
        if self.omega_max < 0:
            raise ConfigError(f"omega_max must be non-negative, got {self.omega_max}")

    def polytope(self):
        """Return ``(A, b)`` with the input box written as ``A @ [v, omega] >= b``."""
        a = np.array([[1.0, 0.0], [-1.0, 0.0], [0.0, 1.0], [0.0, -1.0]])
        b = np.array([self.v_min, -self.v_max, -self.omega_max, -self.omega_max])
        return a, b

    def stacked_polytope(self, k):
        """Block-diagonal polytope for ``k`` vehicles with inputs stacked as ``[v1, w1, v2, ...]``."""
        a, b = self.polytope()
        return np.kron(np.eye(k), a), np.tile(b, k)

    def contains(self, u, tol=1e-8):
        u = np.asarray(u, dtype=float).reshape(-1, 2)
        return bool(
            np.all(u[:, 0] >= self.v_min - tol)
            and np.all(u[:, 0] <= self.v_max + tol)
            and np.all(np.abs(u[:, 1]) <= self.omega_max + tol)
        )

    def interior(self, u):
        """Strict interior test used to validate evading maneuvers."""
        u = np.asarray(u, dtype=float).reshape(-1, 2)
        return bool(
            np.all(u[:, 0] > self.v_min)
            and np.all(u[:, 0] < self.v_max)
            and np.all(np.abs(u[:, 1]) < self.omega_max)
        )

    def clip(self, u):
        u = np.array(u, dtype=float).reshape(-1, 2)
        u[:, 0] = np.clip(u[:, 0], self.v_min, self.v_max)
        u[:, 1] = np.clip(u[:, 1], -self.omega_max, self.omega_max)
        return u


def unicycle_flow(state, u):
    """Time derivative ``(v cos(theta), v sin(theta), omega)``; works on stacked arrays too."""
    state = np.asarray(state, dtype=float)
    u = np.asarray(u, dtype=float)
    theta = state[..., 2]
    v = u[..., 0]
    return np.stack([v * np.cos(theta), v * np.sin(theta), u[..., 1] + 0.0 * v], axis=-1)


def integrate_rk4(x, inputs, dt):
    """One classical Runge-Kutta step of the whole team with inputs held over ``dt``."""
    x = np.asarray(x, dtype=float)
    inputs = np.asarray(inputs, dtype=float)
    if dt < 0:
        raise ValueError(f"dt must be non-negative, got {dt}")
    if inputs.shape[:-1] != x.shape[:-1]:
        raise ValueError(f"got {inputs.shape[:-1]} inputs for {x.shape[:-1]} vehicles")
    if dt == 0:
        return x.copy()
    k1 = unicycle_flow(x, inputs)
    k2 = unicycle_flow(x + 0.5 * dt * k1, inputs)
    k3 = unicycle_flow(x + 0.5 * dt * k2, inputs)
    k4 = unicycle_flow(x + dt * k3, inputs)
    return x + dt / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4)


def analytic_arc(state, u, tau):
    """Exact pose after flying constant ``u`` for ``tau`` seconds.

    Broadcasts over leading dimensions of ``state``/``u`` and over ``tau``.
    For a turning vehicle the position moves on the circle with centre
    ``(px - r sin(theta), py + r cos(theta))`` and signed radius ``r = v/omega``.
    """
    state = np.asarray(state, dtype=float)
    u = np.asarray(u, dtype=float)
    tau = np.asarray(tau, dtype=float)
    px, py, th = state[..., 0], state[..., 1], state[..., 2]
    v, w = u[..., 0], u[..., 1]
    turning = np.abs(w) >= STRAIGHT_EPS
    w_safe = np.where(turning, w, 1.0)
    r = v / w_safe
    th_end = th + w * tau
    x_turn = px + r * (np.sin(th_end) - np.sin(th))
    y_turn = py - r * (np.cos(th_end) - np.cos(th))
    x_line = px + v * tau * np.cos(th)
    y_line = py + v * tau * np.sin(th)
    return np.stack(
        [np.where(turning, x_turn, x_line), np.where(turning, y_turn, y_line), th_end + 0.0 * px],
        axis=-1,
    )


def arc_jacobian(state, u, tau):
    """Sensitivity ``d analytic_arc(state, u, tau) / d state`` as a 3x3 matrix."""
    _, _, th = state
    v, w = u
    jac = np.eye(3)
    if abs(w) < STRAIGHT_EPS:
        jac[0, 2] = -v * tau * np.sin(th)
        jac[1, 2] = v * tau * np.cos(th)
    else:
        r = v / w
        jac[0, 2] = r * (np.cos(th + w * tau) - np.cos(th))
        jac[1, 2] = r * (np.sin(th + w * tau) - np.sin(th))
    return jac


def integrate_sensitivity(state, u, tau, steps=1000):
    """Propagate a pose and its variational matrix ``d x(tau) / d x(0)`` with RK4.

    This is the numeric route to the sensitivity: it never uses the
    closed-form arc, only the vector field and its state Jacobian.
    """
    v, w = float(u[0]), float(u[1])

    def rhs(z):
        pose, jac = z[:3], z[3:].reshape(3, 3)
        a = np.zeros((3, 3))
        a[0, 2] = -v * np.sin(pose[2])
        a[1, 2] = v * np.cos(pose[2])
        dpose = np.array([v * np.cos(pose[2]), v * np.sin(pose[2]), w])
        return np.concatenate([dpose, (a @ jac).ravel()])

    z = np.concatenate([np.asarray(state, dtype=float), np.eye(3).ravel()])
    if tau <= 0:
        return z[:3], z[3:].reshape(3, 3)
    h = tau / steps
    for _ in range(steps):
        k1 = rhs(z)
        k2 = rhs(z + 0.5 * h * k1)
        k3 = rhs(z + 0.5 * h * k2)
        k4 = rhs(z + h * k3)
        z = z + h / 6.0 * (k1 + 2 * k2 + 2 * k3 + k4)
    return z[:3], z[3:].reshape(3, 3)


def as_team(states):
    """Stack an iterable of poses into a ``(k, 3)`` array, checking shape and finiteness."""
    x = np.array(states, dtype=float)
    if x.ndim != 2 or x.shape[1] != 3:
        raise ValueError(f"team state must have shape (k, 3), got {x.shape}")
    if not np.all(np.isfinite(x)):
        raise ValueError("team state contains non-finite values")
    return x
