"""Codebook-based user tracking: GLRT direction estimation, trajectory fit, codeword selection."""
from __future__ import annotations

from collections import deque
from dataclasses import dataclass

import numpy as np

from irs_tracking.codebook import (
    CodebookConfig,
    Codeword,
    MainLobeTable,
    axis_factor,
    candidate_set,
)
from irs_tracking.geometry import Direction, direction_cosines, direction_cosines_array

_ANGLE_LIMIT = np.deg2rad(89.99)


class DegenerateHypothesis(ValueError):
    """All candidate responses vanish for a hypothesis; the channel gain is unidentifiable."""


@dataclass(frozen=True)
class IdeMeasurement:
    codeword: Codeword
    samples: np.ndarray
    pilot: np.ndarray
    timestamp: float = 0.0


@dataclass(frozen=True)
class HypothesisGrid:
    thetas: np.ndarray
    phis: np.ndarray

    @property
    def H_per_axis(self) -> int:
        return len(self.thetas)

    @property
    def directions(self) -> np.ndarray:
        """``(H^2, 2)`` hypotheses in lexicographic (theta, phi) order."""
        th, ph = np.meshgrid(self.thetas, self.phis, indexing="ij")
        return np.stack([th.ravel(), ph.ravel()], axis=1)

    @property
    def cell(self) -> tuple[float, float]:
        return float(self.thetas[1] - self.thetas[0]), float(self.phis[1] - self.phis[0])


def hypothesis_offsets_deg(gamma: int, H_per_axis: int, M: int) -> np.ndarray:
    """Offsets (degrees) of the per-axis hypotheses around the current main lobe."""
    if H_per_axis < 2:
        raise ValueError("need at least two hypotheses per axis")
    n = np.arange(H_per_axis)
    return (n * (2 * gamma + 1) / (H_per_axis - 1) - 0.5 - gamma) * 180.0 / M


def build_hypothesis_grid(
    current: Codeword, gamma: int, H_per_axis: int, cfg: CodebookConfig, main_lobes: MainLobeTable
) -> HypothesisGrid:
    center = main_lobes[current]
    thetas = center.theta + np.deg2rad(hypothesis_offsets_deg(gamma, H_per_axis, cfg.M_y))
    phis = center.phi + np.deg2rad(hypothesis_offsets_deg(gamma, H_per_axis, cfg.M_z))
    return HypothesisGrid(np.clip(thetas, -_ANGLE_LIMIT, _ANGLE_LIMIT), np.clip(phis, -_ANGLE_LIMIT, _ANGLE_LIMIT))


def hypothesis_responses(codewords, directions: np.ndarray, psi_bs: Direction, cfg: CodebookConfig) -> np.ndarray:
    """IRS responses ``g_m(psi_bs, hypothesis)``, shape ``(H, len(codewords))``."""
    directions = np.atleast_2d(directions)
    ay_in, az_in = direction_cosines(psi_bs)
    a1, a2 = direction_cosines_array(directions[:, 0], directions[:, 1])
    m_y = np.array([c.m_y for c in codewords])
    m_z = np.array([c.m_z for c in codewords])
    fy = axis_factor(m_y[None, :], (ay_in + a1)[:, None], cfg, "y")
    fz = axis_factor(m_z[None, :], (az_in + a2)[:, None], cfg, "z")
    return cfg.g_bar * fy * fz


def _stack(meas: list[IdeMeasurement]):
    if not meas:
        raise ValueError("no measurements")
    y = np.stack([np.asarray(m.samples) for m in meas])
    s = np.asarray(meas[0].pilot)
    return y, s


def _channel_estimates(y, s, g):
    """Closed-form nuisance maximizer for each hypothesis row of ``g``; NaN where degenerate."""
    corr = y @ s.conj()  # s^H y_m
    num = g.conj() @ corr
    den = np.real(np.vdot(s, s)) * np.sum(np.abs(g) ** 2, axis=1)
    with np.errstate(invalid="ignore", divide="ignore"):
        return np.where(den > 0, num / den, np.nan)


def glrt_channel_estimate(meas: list[IdeMeasurement], hyp: Direction, psi_bs: Direction, cfg: CodebookConfig) -> complex:
    y, s = _stack(meas)
    g = hypothesis_responses([m.codeword for m in meas], hyp.as_array(), psi_bs, cfg)
    h = _channel_estimates(y, s, g)[0]
    if np.isnan(h):
        raise DegenerateHypothesis(f"zero response for every candidate at {hyp}")
    return complex(h)


def glrt_residuals(meas: list[IdeMeasurement], directions: np.ndarray, psi_bs: Direction, cfg: CodebookConfig):
    """Least-squares residual of every hypothesis (inf where degenerate) and the gain estimates."""
    y, s = _stack(meas)
    g = hypothesis_responses([m.codeword for m in meas], directions, psi_bs, cfg)
    h = _channel_estimates(y, s, g)
    model = h[:, None, None] * g[:, :, None] * s[None, None, :]
    res = np.sum(np.abs(y[None] - model) ** 2, axis=(1, 2))
    return np.where(np.isnan(h), np.inf, res), h


def glrt_estimate_direction(
    meas: list[IdeMeasurement], grid: HypothesisGrid, psi_bs: Direction, cfg: CodebookConfig
) -> Direction:
    dirs = grid.directions
    res, _ = glrt_residuals(meas, dirs, psi_bs, cfg)
    if not np.isfinite(res).any():
        raise DegenerateHypothesis("every hypothesis is degenerate")
    best = int(np.argmin(res))  # first minimum = lexicographically smallest (theta, phi)
    return Direction(*dirs[best])


class EstimateHistory:
    """The last ``capacity`` (block start time, direction estimate) pairs."""

    def __init__(self, capacity: int):
        if capacity < 1:
            raise ValueError("capacity must be >= 1")
        self.capacity = capacity
        self._items: deque[tuple[float, Direction]] = deque(maxlen=capacity)

    def append(self, t: float, estimate: Direction) -> None:
        if self._items and t <= self._items[-1][0]:
            raise ValueError("timestamps must be strictly increasing")
        self._items.append((float(t), estimate))

    def __len__(self) -> int:
        return len(self._items)

    def __iter__(self):
        return iter(self._items)

    def arrays(self) -> tuple[np.ndarray, np.ndarray]:
        times = np.array([t for t, _ in self._items])
        angles = np.array([[d.theta, d.phi] for _, d in self._items]).reshape(-1, 2)
        return times, angles


@dataclass(frozen=True)
class TrajectoryPolynomial:
    coeffs_theta: np.ndarray  # ascending powers of (t - time_origin)
    coeffs_phi: np.ndarray
    time_origin: float

    @property
    def order(self) -> int:
        return len(self.coeffs_theta) - 1


def polyfit_normal_equations(tau: np.ndarray, values: np.ndarray, order: int) -> np.ndarray:
    """Least-squares polynomial coefficients (ascending) via the normal equations."""
    V = np.vander(tau, order + 1, increasing=True)
    return np.linalg.solve(V.T @ V, V.T @ values)


def fit_trajectory(history: EstimateHistory, order: int) -> TrajectoryPolynomial:
    """Per-angle least-squares fit; the order is reduced to ``len(history) - 1`` when short."""
    if len(history) == 0:
        raise ValueError("empty estimate history")
    times, angles = history.arrays()
    n = min(order, len(times) - 1)
    origin = float(times[-1])
    coeffs = polyfit_normal_equations(times - origin, angles, n)
    return TrajectoryPolynomial(coeffs[:, 0].copy(), coeffs[:, 1].copy(), origin)


def fit_mse(history: EstimateHistory, poly: TrajectoryPolynomial) -> float:
    times, angles = history.arrays()
    pred = predict_angles(poly, times)
    return float(np.mean(np.sum((pred - angles) ** 2, axis=1)))


def _horner(coeffs, x):
    out = np.zeros_like(x, dtype=float)
    for c in coeffs[::-1]:
        out = out * x + c
    return out


def predict_angles(poly: TrajectoryPolynomial, t) -> np.ndarray:
    """Predicted (theta, phi) at times ``t``, shape ``t.shape + (2,)``, clipped to the half-space."""
    x = np.asarray(t, dtype=float) - poly.time_origin
    out = np.stack([_horner(poly.coeffs_theta, x), _horner(poly.coeffs_phi, x)], axis=-1)
    return np.clip(out, -_ANGLE_LIMIT, _ANGLE_LIMIT)


def predict_direction(poly: TrajectoryPolynomial, t: float) -> Direction:
    return Direction(*predict_angles(poly, t))


def select_codewords(predicted: np.ndarray, main_lobes: MainLobeTable, k: int = 8) -> np.ndarray:
    """Flat indices of the codewords whose main lobes are nearest to each predicted (theta, phi).

    A k-d tree proposes ``k`` neighbours; exact squared distances decide, and
    equal distances go to the smallest flat index (lexicographic ``(m_y, m_z)``).
    """
    lobes = main_lobes.flat
    predicted = np.atleast_2d(predicted)
    k = min(k, len(lobes))
    _, cand = main_lobes.tree.query(predicted, k=k)
    cand = np.sort(cand.reshape(len(predicted), k), axis=1)
    d2 = ((lobes[cand] - predicted[:, None, :]) ** 2).sum(axis=-1)
    return cand[np.arange(len(predicted)), np.argmin(d2, axis=1)]


def select_codeword(predicted: Direction, cfg: CodebookConfig, main_lobes: MainLobeTable) -> Codeword:
    idx = int(select_codewords(predicted.as_array(), main_lobes)[0])
    return Codeword(*divmod(idx, cfg.M_z))


class Tracker:
    """State of the tracking loop: current codeword, estimate history and the latest fit."""

    def __init__(
        self,
        cfg: CodebookConfig,
        main_lobes: MainLobeTable,
        psi_bs: Direction,
        initial: Codeword,
        gamma: int = 1,
        H_per_axis: int = 11,
        history_size: int = 3,
        order: int = 1,
    ):
        self.cfg = cfg
        self.main_lobes = main_lobes
        self.psi_bs = psi_bs
        self.current = initial
        self.gamma = gamma
        self.H_per_axis = H_per_axis
        self.order = order
        self.history = EstimateHistory(history_size)
        self.poly: TrajectoryPolynomial | None = None

    def candidates(self) -> list[Codeword]:
        return candidate_set(self.current, self.gamma, self.cfg)

    def update(self, t_block: float, meas: list[IdeMeasurement]) -> Direction:
        """Estimate the direction from one IDE frame and refit the trajectory."""
        grid = build_hypothesis_grid(self.current, self.gamma, self.H_per_axis, self.cfg, self.main_lobes)
        est = glrt_estimate_direction(meas, grid, self.psi_bs, self.cfg)
        self.history.append(t_block, est)
        self.poly = fit_trajectory(self.history, self.order)
        return est

    def select(self, times) -> tuple[np.ndarray, np.ndarray]:
        """Codewords (flat indices) and predicted angles at the given channel-estimation start times."""
        pred = predict_angles(self.poly, np.asarray(times, dtype=float))
        idx = select_codewords(pred, self.main_lobes)
        if len(idx):
            self.current = Codeword(*divmod(int(idx[-1]), self.cfg.M_z))
        return idx, pred
