"""Pairwise safety functions: ``rho >= 0`` means the two vehicles are far enough apart now."""

import enum
from dataclasses import dataclass

import numpy as np

from .errors import DegenerateGradient, NegativeRadicand


class SafetyKind(enum.Enum):
    EUCLIDEAN_SQ = "euclidean_sq"
    ADJUSTED_SQ = "adjusted_sq"
    ADJUSTED_SQRT = "adjusted_sqrt"
    PLAIN_SQRT = "plain_sqrt"

    @property
    def adjusted(self):
        return self in (SafetyKind.ADJUSTED_SQ, SafetyKind.ADJUSTED_SQRT)

    @property
    def sqrt(self):
        return self in (SafetyKind.ADJUSTED_SQRT, SafetyKind.PLAIN_SQRT)


@dataclass(frozen=True)
class SafetyFnSpec:
    """One pairwise separation constraint between vehicles ``i < j``.

    The adjusted variants subtract ``delta - delta*cos(theta_i)`` from the
    squared distance, always using the heading of the lower-indexed vehicle.
    """

    kind: SafetyKind
    i: int
    j: int
    d_s: float
    delta: float = 0.0

    def __post_init__(self):
        if not 0 <= self.i < self.j:
            raise ValueError(f"need 0 <= i < j, got i={self.i}, j={self.j}")
        if not self.d_s > 0:
            raise ValueError(f"d_s must be positive, got {self.d_s}")
        if self.kind.adjusted and not self.delta > 0:
            raise ValueError(f"{self.kind.value} needs delta > 0, got {self.delta}")
        if self.delta < 0:
            raise ValueError(f"delta must be non-negative, got {self.delta}")

    @property
    def effective_delta(self):
        return self.delta if self.kind.adjusted else 0.0

    def with_kind(self, kind):
        return SafetyFnSpec(kind, self.i, self.j, self.d_s, self.delta)


def pair_distance_sq(x, i, j):
    x = np.asarray(x, dtype=float)
    dx = x[i, 0] - x[j, 0]
    dy = x[i, 1] - x[j, 1]
    return dx * dx + dy * dy


def radicand(spec, pose_i, pose_j):
    """Squared distance with the heading adjustment; broadcasts over leading axes."""
    pose_i = np.asarray(pose_i, dtype=float)
    pose_j = np.asarray(pose_j, dtype=float)
    d = (pose_i[..., 0] - pose_j[..., 0]) ** 2 + (pose_i[..., 1] - pose_j[..., 1]) ** 2
    delta = spec.effective_delta
    if delta:
        d = d - delta + delta * np.cos(pose_i[..., 2])
    return d


def rho_from_radicand(spec, rad):
    """Map an (adjusted) squared distance to the safety value of ``spec``."""
    rad = np.asarray(rad, dtype=float)
    if spec.kind.sqrt:
        if np.any(rad < 0):
            raise NegativeRadicand(
                f"{spec.kind.value} radicand {np.min(rad):.3e} < 0 for pair ({spec.i}, {spec.j})"
            )
        return np.sqrt(rad) - spec.d_s
    return rad - spec.d_s**2


def rho_pair(spec, pose_i, pose_j):
    return rho_from_radicand(spec, radicand(spec, pose_i, pose_j))


def rho(spec, x):
    x = np.asarray(x, dtype=float)
    return float(rho_pair(spec, x[spec.i], x[spec.j]))


def radicand_pair_gradient(spec, pose_i, pose_j):
    """Gradient of the radicand w.r.t. ``(px_i, py_i, th_i, px_j, py_j, th_j)``."""
    dx = pose_i[0] - pose_j[0]
    dy = pose_i[1] - pose_j[1]
    g = np.array([2 * dx, 2 * dy, 0.0, -2 * dx, -2 * dy, 0.0])
    if spec.effective_delta:
        g[2] = -spec.effective_delta * np.sin(pose_i[2])
    return g


def chain_sqrt(spec, rad, grad_rad):
    """Apply the outer square root, if any, to a radicand gradient."""
    if not spec.kind.sqrt:
        return grad_rad
    if rad < 0:
        raise NegativeRadicand(f"radicand {rad:.3e} < 0 for pair ({spec.i}, {spec.j})")
    if rad == 0:
        raise DegenerateGradient(f"sqrt safety function has no gradient at zero radicand, pair ({spec.i}, {spec.j})")
    return grad_rad / (2.0 * np.sqrt(rad))


def scatter_pair(spec, k, pair_grad):
    """Place a 6-vector over the pair's coordinates into a length-``3k`` gradient."""
    g = np.zeros(3 * k)
    g[3 * spec.i : 3 * spec.i + 3] = pair_grad[:3]
    g[3 * spec.j : 3 * spec.j + 3] = pair_grad[3:]
    return g


def rho_gradient(spec, x):
    x = np.asarray(x, dtype=float)
    pi, pj = x[spec.i], x[spec.j]
    rad = float(radicand(spec, pi, pj))
    g = chain_sqrt(spec, rad, radicand_pair_gradient(spec, pi, pj))
    return scatter_pair(spec, x.shape[0], g)
