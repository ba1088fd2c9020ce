"""Coordinate frames, direction parameterization and UPA steering vectors.

A direction relative to an array lying in the ``u1``-``u2`` plane is the angle
pair ``theta = arctan(u1/u3)``, ``phi = arctan(u2/u3)`` of a vector with a
strictly positive component along the array normal ``u3``.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

SPEED_OF_LIGHT = 299_792_458.0

_HALF_PI = np.pi / 2


@dataclass(frozen=True)
class Direction:
    """Angle pair (radians) of a ray in the front half-space of an array."""

    theta: float
    phi: float

    def __post_init__(self):
        for name in ("theta", "phi"):
            val = getattr(self, name)
            if not (-_HALF_PI < val < _HALF_PI):
                raise ValueError(f"{name}={val!r} outside the open interval (-pi/2, pi/2)")

    @classmethod
    def from_degrees(cls, theta_deg: float, phi_deg: float) -> "Direction":
        return cls(float(np.deg2rad(theta_deg)), float(np.deg2rad(phi_deg)))

    @property
    def degrees(self) -> tuple[float, float]:
        return float(np.rad2deg(self.theta)), float(np.rad2deg(self.phi))

    def as_array(self) -> np.ndarray:
        return np.array([self.theta, self.phi])


@dataclass(frozen=True)
class PlaneFrame:
    """Orthonormal right-handed frame of an array: two in-plane axes and the normal."""

    axis_u1: tuple[float, float, float]
    axis_u2: tuple[float, float, float]
    normal_u3: tuple[float, float, float]

    def __post_init__(self):
        m = self.matrix
        if not np.allclose(m @ m.T, np.eye(3), atol=1e-12):
            raise ValueError("frame axes must be orthonormal")
        if not np.allclose(np.cross(m[0], m[1]), m[2], atol=1e-12):
            raise ValueError("frame must be right-handed (u1 x u2 = u3)")

    @property
    def matrix(self) -> np.ndarray:
        """Rows are ``u1``, ``u2``, ``u3``; maps global vectors to frame coordinates."""
        return np.array([self.axis_u1, self.axis_u2, self.normal_u3], dtype=float)


# IRS in the y-z plane facing +x; BS UPA in the x-z plane facing +y.
IRS_FRAME = PlaneFrame((0.0, 1.0, 0.0), (0.0, 0.0, 1.0), (1.0, 0.0, 0.0))
BS_FRAME = PlaneFrame((-1.0, 0.0, 0.0), (0.0, 0.0, 1.0), (0.0, 1.0, 0.0))


def direction_from_vector(v, frame: PlaneFrame) -> Direction:
    """Parameterize global vector ``v`` relative to ``frame``.

    Raises ``ValueError`` when ``v`` is not strictly in front of the array.
    """
    u1, u2, u3 = frame.matrix @ np.asarray(v, dtype=float)
    if not u3 > 0:
        raise ValueError(f"vector lies behind the array plane (normal component {u3!r})")
    return Direction(float(np.arctan(u1 / u3)), float(np.arctan(u2 / u3)))


def directions_from_vectors(v: np.ndarray, frame: PlaneFrame) -> tuple[np.ndarray, np.ndarray]:
    """Vectorized ``direction_from_vector`` for an ``(..., 3)`` array; returns (theta, phi)."""
    local = np.asarray(v, dtype=float) @ frame.matrix.T
    u3 = local[..., 2]
    if np.any(u3 <= 0):
        raise ValueError("vector lies behind the array plane")
    return np.arctan(local[..., 0] / u3), np.arctan(local[..., 1] / u3)


def unit_vector(d: Direction, frame: PlaneFrame | None = None) -> np.ndarray:
    """Unit vector of direction ``d``; frame coordinates unless ``frame`` is given."""
    local = np.array([np.tan(d.theta), np.tan(d.phi), 1.0])
    local /= np.linalg.norm(local)
    if frame is None:
        return local
    return frame.matrix.T @ local


def direction_cosines_array(theta, phi) -> tuple[np.ndarray, np.ndarray]:
    """Projections of the unit ray onto ``u1`` and ``u2`` (broadcasting)."""
    t1 = np.tan(theta)
    t2 = np.tan(phi)
    norm = np.sqrt(1.0 + t1 * t1 + t2 * t2)
    return t1 / norm, t2 / norm


def direction_cosines(d: Direction) -> tuple[float, float]:
    a1, a2 = direction_cosines_array(d.theta, d.phi)
    return float(a1), float(a2)


def upa_steering_vector(d: Direction, n1: int, n2: int, spacing: float, wavelength: float) -> np.ndarray:
    """Steering vector of an ``n1 x n2`` UPA, element ``(k1, k2)`` at flat index ``k1*n2 + k2``."""
    if n1 < 1 or n2 < 1:
        raise ValueError("array dimensions must be positive")
    if spacing <= 0:
        raise ValueError("element spacing must be positive")
    a1, a2 = direction_cosines(d)
    k1 = np.arange(n1)[:, None]
    k2 = np.arange(n2)[None, :]
    phase = 2 * np.pi / wavelength * spacing * (a1 * k1 + a2 * k2)
    return np.exp(1j * phase).ravel()
