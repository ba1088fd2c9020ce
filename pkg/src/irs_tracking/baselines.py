"""Reference schemes: full codebook search and per-unit-cell optimization with perfect CSI."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from irs_tracking.channel import ChannelDrop, all_codeword_signals, complex_noise, pair_terms
from irs_tracking.codebook import CodebookConfig, Codeword


@dataclass(frozen=True)
class PerCellCascade:
    """End-to-end gain through each unit cell, all path pairs summed; shape ``(Q_y, Q_z)``."""

    coeffs: np.ndarray

    def output(self, phases: np.ndarray) -> complex:
        """Noiseless unit-symbol output for unit-cell phase shifts ``phases``."""
        return complex(np.sum(self.coeffs * np.exp(1j * phases)))


def fs_select(signals: np.ndarray, pilot: np.ndarray, sigma2: float = 0.0, rng=None) -> int:
    """Flat index of the codeword with the largest received pilot energy.

    ``signals`` holds the noiseless unit-symbol output per codeword (any shape);
    without ``rng`` the measurement is noiseless.
    """
    flat = np.ravel(signals)
    y = flat[:, None] * np.asarray(pilot)[None, :]
    if rng is not None:
        y = y + complex_noise(rng, sigma2, y.shape)
    energy = np.sum(np.abs(y) ** 2, axis=1)
    return int(np.argmax(energy))


def full_search_select(
    drop: ChannelDrop, pilots: np.ndarray, cfg: CodebookConfig, sigma2: float = 0.0, rng=None
) -> Codeword:
    """Sweep the whole codebook with ``pilots`` and keep the strongest codeword."""
    signals = all_codeword_signals(*pair_terms(drop), cfg)
    return Codeword(*divmod(fs_select(signals, pilots, sigma2, rng), cfg.M_z))


def cascade_from_terms(weights, a_y, a_z, cfg: CodebookConfig) -> np.ndarray:
    """Per-cell cascade for path-pair terms of shape ``(..., P)``; returns ``(..., Q_y, Q_z)``."""
    k = 2 * np.pi / cfg.wavelength
    qy = np.arange(cfg.Q_y)
    qz = np.arange(cfg.Q_z)
    ey = np.exp(1j * k * cfg.d_y * np.asarray(a_y)[..., None, :] * qy[:, None])  # (..., Q_y, P)
    ez = np.exp(1j * k * cfg.d_z * np.asarray(a_z)[..., :, None] * qz[None, :])  # (..., P, Q_z)
    return cfg.g_bar * (ey * np.asarray(weights)[..., None, :]) @ ez


def per_cell_cascade(drop: ChannelDrop, cfg: CodebookConfig) -> PerCellCascade:
    return PerCellCascade(cascade_from_terms(*pair_terms(drop), cfg))


def optimal_phases(cascade: PerCellCascade) -> np.ndarray:
    """Phase shifts that co-phase every unit cell."""
    return -np.angle(cascade.coeffs)


def full_opt_snr(cascade: PerCellCascade, P_TX: float, sigma2: float) -> float:
    return float(np.sum(np.abs(cascade.coeffs)) ** 2 * P_TX / sigma2)


def full_opt_amplitudes(weights, a_y, a_z, cfg: CodebookConfig, chunk: int = 128) -> np.ndarray:
    """Optimal unit-symbol output amplitude ``sum |c_q|`` for a batch of channel states ``(F, P)``."""
    weights = np.atleast_2d(weights)
    a_y = np.atleast_2d(a_y)
    a_z = np.atleast_2d(a_z)
    out = np.empty(len(weights))
    for start in range(0, len(weights), chunk):
        sl = slice(start, start + chunk)
        out[sl] = np.abs(cascade_from_terms(weights[sl], a_y[sl], a_z[sl], cfg)).sum(axis=(-2, -1))
    return out
