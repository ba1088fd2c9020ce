"""Quadratic IRS phase-shift codebook and IRS response evaluation.

The response of a codeword separates into a product of two one-dimensional
sums over the unit-cell rows and columns, so every evaluation here costs
``O(Q_y + Q_z)`` instead of ``O(Q_y * Q_z)``.
"""
from __future__ import annotations

import hashlib
import json
import logging
import os
from dataclasses import asdict, dataclass
from functools import cached_property
from pathlib import Path
from typing import NamedTuple

import numpy as np
from scipy.spatial import cKDTree

from irs_tracking.geometry import SPEED_OF_LIGHT, Direction, direction_cosines, direction_cosines_array

log = logging.getLogger(__name__)

_ANGLE_LIMIT = np.deg2rad(89.99)


class Codeword(NamedTuple):
    m_y: int
    m_z: int


@dataclass(frozen=True)
class CodebookConfig:
    M_y: int = 70
    M_z: int = 70
    Q_y: int = 100
    Q_z: int = 100
    d_y: float = SPEED_OF_LIGHT / 28e9 / 2
    d_z: float = SPEED_OF_LIGHT / 28e9 / 2
    wavelength: float = SPEED_OF_LIGHT / 28e9
    w: float = 2.0

    def __post_init__(self):
        for name in ("M_y", "M_z", "Q_y", "Q_z"):
            if getattr(self, name) < 1:
                raise ValueError(f"{name} must be >= 1")
        if self.w < 0:
            raise ValueError("beamwidth parameter w must be >= 0")
        if min(self.d_y, self.d_z, self.wavelength) <= 0:
            raise ValueError("lengths must be positive")

    @classmethod
    def for_carrier(cls, f_c: float, **kw) -> "CodebookConfig":
        """Half-wavelength unit cells at carrier frequency ``f_c``."""
        lam = SPEED_OF_LIGHT / f_c
        return cls(d_y=lam / 2, d_z=lam / 2, wavelength=lam, **kw)

    @property
    def size(self) -> int:
        return self.M_y * self.M_z

    @property
    def n_cells(self) -> int:
        return self.Q_y * self.Q_z

    @property
    def delta_beta_y(self) -> float:
        return 2.0 / self.M_y

    @property
    def delta_beta_z(self) -> float:
        return 2.0 / self.M_z

    @property
    def g_bar(self) -> float:
        return 4 * np.pi * self.d_y * self.d_z / self.wavelength**2

    def beta_y(self, m_y):
        return -1.0 + np.asarray(m_y) * self.delta_beta_y

    def beta_z(self, m_z):
        return -1.0 + np.asarray(m_z) * self.delta_beta_z

    def key(self) -> str:
        blob = json.dumps(asdict(self), sort_keys=True)
        return hashlib.sha256(blob.encode()).hexdigest()[:16]

    def codewords(self) -> list[Codeword]:
        return [Codeword(a, b) for a in range(self.M_y) for b in range(self.M_z)]


def _axis_params(cfg: CodebookConfig, axis: str):
    if axis == "y":
        return cfg.M_y, cfg.Q_y, cfg.d_y
    if axis == "z":
        return cfg.M_z, cfg.Q_z, cfg.d_z
    raise ValueError(f"unknown axis {axis!r}")


def axis_phase(m, q, cfg: CodebookConfig, axis: str):
    """One-axis term of the quadratic codeword phase (broadcasting over ``m`` and ``q``)."""
    M, Q, _ = _axis_params(cfg, axis)
    dbeta = 2.0 / M
    beta = -1.0 + np.asarray(m) * dbeta
    q = np.asarray(q)
    return -np.pi * (cfg.w * dbeta / (2 * Q) * q**2 + beta * q)


def codeword_phase(cw: Codeword, q_y, q_z, cfg: CodebookConfig):
    """Phase shift (radians) of unit cell ``(q_y, q_z)`` under codeword ``cw``."""
    return axis_phase(cw.m_y, q_y, cfg, "y") + axis_phase(cw.m_z, q_z, cfg, "z")


def axis_factor(m, a, cfg: CodebookConfig, axis: str) -> np.ndarray:
    """One-dimensional array factor ``sum_q exp(j(k d a q + omega_axis(m, q)))``.

    ``m`` (codeword index along the axis) and ``a`` (summed direction cosine)
    broadcast against each other.  Evaluated as a polynomial in
    ``exp(j k d a)`` with Horner's rule, so only ``a.size + m.size * Q``
    complex exponentials are needed.
    """
    M, Q, d = _axis_params(cfg, axis)
    z = np.exp(1j * 2 * np.pi / cfg.wavelength * d * np.asarray(a, dtype=float))
    coeffs = np.exp(1j * axis_phase(np.asarray(m)[..., None], np.arange(Q), cfg, axis))
    acc = np.zeros(np.broadcast_shapes(z.shape, coeffs.shape[:-1]), dtype=complex)
    for q in range(Q - 1, -1, -1):
        acc *= z
        acc += coeffs[..., q]
    return acc


def axis_factor_matrix(a, cfg: CodebookConfig, axis: str) -> np.ndarray:
    """Axis factors for every codeword index against a flat array ``a``; shape ``(M, len(a))``."""
    M, Q, d = _axis_params(cfg, axis)
    q = np.arange(Q)
    weights = np.exp(1j * axis_phase(np.arange(M)[:, None], q[None, :], cfg, axis))
    steer = np.exp(1j * 2 * np.pi / cfg.wavelength * d * np.outer(q, np.ravel(a)))
    return weights @ steer


def response_from_cosines(m_y, m_z, a_y, a_z, cfg: CodebookConfig) -> np.ndarray:
    """IRS response for summed direction cosines ``a_y``, ``a_z`` (broadcasting)."""
    return cfg.g_bar * axis_factor(m_y, a_y, cfg, "y") * axis_factor(m_z, a_z, cfg, "z")


def irs_response(cw: Codeword, psi_in: Direction, psi_out: Direction, cfg: CodebookConfig) -> complex:
    """Reflection coefficient of codeword ``cw`` from ``psi_in`` to ``psi_out``."""
    ay_in, az_in = direction_cosines(psi_in)
    ay_out, az_out = direction_cosines(psi_out)
    return complex(response_from_cosines(cw.m_y, cw.m_z, ay_in + ay_out, az_in + az_out, cfg))


def candidate_set(current: Codeword, gamma: int, cfg: CodebookConfig) -> list[Codeword]:
    """Codewords within Chebyshev distance ``gamma`` of ``current``, clipped to the codebook."""
    if gamma < 0:
        raise ValueError("gamma must be >= 0")
    ys = range(max(current.m_y - gamma, 0), min(current.m_y + gamma, cfg.M_y - 1) + 1)
    zs = range(max(current.m_z - gamma, 0), min(current.m_z + gamma, cfg.M_z - 1) + 1)
    return [Codeword(a, b) for a in ys for b in zs]


@dataclass(frozen=True)
class MainLobeTable:
    """Main-lobe direction (radians) of every codeword, arrays of shape ``(M_y, M_z)``."""

    theta: np.ndarray
    phi: np.ndarray

    def __getitem__(self, cw: Codeword) -> Direction:
        return Direction(float(self.theta[cw]), float(self.phi[cw]))

    @cached_property
    def flat(self) -> np.ndarray:
        """``(M, 2)`` array of (theta, phi) in codeword flat order (``m_y`` major)."""
        return np.stack([self.theta.ravel(), self.phi.ravel()], axis=1)

    @cached_property
    def tree(self) -> cKDTree:
        return cKDTree(self.flat)


def _log_gain(m_y, m_z, theta, phi, a_in, cfg):
    a1, a2 = direction_cosines_array(theta, phi)
    fy = axis_factor(m_y, a_in[0] + a1, cfg, "y")
    fz = axis_factor(m_z, a_in[1] + a2, cfg, "z")
    return np.log(np.abs(fy) + 1e-300) + np.log(np.abs(fz) + 1e-300)


def compute_main_lobes(
    cfg: CodebookConfig, psi_in: Direction, grid_points: int = 181, tol: float = 1e-4
) -> MainLobeTable:
    """Grid search over the front half-space followed by a pattern-search refinement."""
    a_in = np.array(direction_cosines(psi_in))
    grid = np.deg2rad(np.linspace(-90, 90, grid_points + 2)[1:-1])
    th, ph = np.meshgrid(grid, grid, indexing="ij")
    a1, a2 = direction_cosines_array(th.ravel(), ph.ravel())
    fy = np.abs(axis_factor_matrix(a_in[0] + a1, cfg, "y"))
    fz = np.abs(axis_factor_matrix(a_in[1] + a2, cfg, "z"))

    best = np.empty((cfg.M_y, cfg.M_z), dtype=np.intp)
    for m_y in range(cfg.M_y):
        best[m_y] = np.argmax(fy[m_y][None, :] * fz, axis=1)
    theta = th.ravel()[best].ravel()
    phi = ph.ravel()[best].ravel()

    m_y, m_z = np.meshgrid(np.arange(cfg.M_y), np.arange(cfg.M_z), indexing="ij")
    m_y, m_z = m_y.ravel(), m_z.ravel()
    value = _log_gain(m_y, m_z, theta, phi, a_in, cfg)
    offsets = [(i, j) for i in (-1, 0, 1) for j in (-1, 0, 1) if (i, j) != (0, 0)]
    step = grid[1] - grid[0]
    while step > tol / 2:
        active = np.arange(theta.size)
        for _ in range(50):
            if active.size == 0:
                break
            moved = np.zeros(active.size, dtype=bool)
            for i, j in offsets:
                t_try = np.clip(theta[active] + i * step, -_ANGLE_LIMIT, _ANGLE_LIMIT)
                p_try = np.clip(phi[active] + j * step, -_ANGLE_LIMIT, _ANGLE_LIMIT)
                v_try = _log_gain(m_y[active], m_z[active], t_try, p_try, a_in, cfg)
                better = v_try > value[active] + 1e-12
                idx = active[better]
                theta[idx], phi[idx], value[idx] = t_try[better], p_try[better], v_try[better]
                moved |= better
            active = active[moved]
        step /= 2
    return MainLobeTable(theta.reshape(cfg.M_y, cfg.M_z), phi.reshape(cfg.M_y, cfg.M_z))


_MEMO: dict[str, MainLobeTable] = {}


def default_cache_dir() -> Path:
    return Path(os.environ.get("IRS_TRACKING_CACHE", Path.home() / ".cache" / "irs_tracking"))


def _table_key(cfg, psi_in, grid_points, tol) -> str:
    blob = json.dumps(
        {"cfg": asdict(cfg), "psi_in": [psi_in.theta, psi_in.phi], "grid": grid_points, "tol": tol, "v": 1},
        sort_keys=True,
    )
    return hashlib.sha256(blob.encode()).hexdigest()[:20]


def main_lobe_table(
    cfg: CodebookConfig,
    psi_in: Direction,
    cache_dir: Path | str | None = None,
    grid_points: int = 181,
    tol: float = 1e-4,
) -> MainLobeTable:
    """Main-lobe table for ``(cfg, psi_in)``, memoized in-process and persisted as ``.npz``.

    Pass ``cache_dir=False`` to skip the on-disk cache.
    """
    key = _table_key(cfg, psi_in, grid_points, tol)
    path = None
    if cache_dir is not False:
        path = Path(cache_dir or default_cache_dir()) / f"mainlobe_{key}.npz"
    table = _MEMO.get(key)
    stale = False
    if table is None and path is not None and path.exists():
        with np.load(path) as data:
            if str(data["key"]) == key:
                table = MainLobeTable(data["theta"], data["phi"])
                _MEMO[key] = table
                return table
        log.info("main-lobe cache %s mismatched, regenerating", path)
        stale = True
    if table is None:
        log.info("computing main-lobe table for %dx%d codebook", cfg.M_y, cfg.M_z)
        table = compute_main_lobes(cfg, psi_in, grid_points, tol)
        _MEMO[key] = table
    if path is not None and (stale or not path.exists()):
        _save_table(path, key, table)
    return table


def _save_table(path: Path, key: str, table: MainLobeTable) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    tmp = path.with_suffix(".tmp.npz")
    np.savez(tmp, key=key, theta=table.theta, phi=table.phi)
    os.replace(tmp, path)


def main_lobe_direction(cw: Codeword, cfg: CodebookConfig, psi_in: Direction, **kw) -> Direction:
    return main_lobe_table(cfg, psi_in, **kw)[cw]
