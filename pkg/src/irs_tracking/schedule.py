"""Transmission-block timing, signaling overhead and effective rate."""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np


@dataclass(frozen=True)
class FrameSchedule:
    """One IDE frame followed by ``eta`` CE+D pairs inside a block of length ``T`` (seconds)."""

    T: float
    T_IDE: float
    T_CE: float
    T_D: float
    T_S: float
    eta: int
    N_IDE: int
    N_CE: int

    def __post_init__(self):
        if self.T_IDE + self.eta * (self.T_CE + self.T_D) > self.T * (1 + 1e-12):
            raise ValueError("frames do not fit into the block")

    @property
    def gamma(self) -> float:
        return (self.T_IDE + self.eta * self.T_CE) / self.T

    def ce_starts(self, t_block: float) -> np.ndarray:
        return t_block + self.T_IDE + np.arange(self.eta) * (self.T_CE + self.T_D)

    def d_starts(self, t_block: float) -> np.ndarray:
        return self.ce_starts(t_block) + self.T_CE


@dataclass(frozen=True)
class BaselineSchedule:
    """Per-unit-cell CSI acquisition before every data frame."""

    T_CE_B: float
    T_D_B: float
    N_CE_B: int

    @property
    def gamma(self) -> float:
        return self.T_CE_B / (self.T_CE_B + self.T_D_B)

    @property
    def period(self) -> float:
        return self.T_CE_B + self.T_D_B

    def d_starts(self, horizon: float) -> np.ndarray:
        """Data-frame start times of all complete periods within ``[0, horizon]``."""
        n = int(math.floor(horizon / self.period + 1e-9))
        return np.arange(n) * self.period + self.T_CE_B


def derive_schedule(T: float, T_S: float, T_ce_d: float, N_IDE: int, n_ide_codewords: int, N_CE: int = 1) -> FrameSchedule:
    """Block layout from the symbol time and the coherence-limited CE+D duration."""
    T_IDE = n_ide_codewords * N_IDE * T_S
    if T_IDE >= T:
        raise ValueError(f"IDE frame ({T_IDE:g} s) does not fit into a block of {T:g} s")
    T_CE = N_CE * T_S
    eta = math.floor((T - T_IDE) / T_ce_d + 1e-12)
    return FrameSchedule(T, T_IDE, T_CE, T_ce_d - T_CE, T_S, eta, N_IDE, N_CE)


def cs_pilot_count(L_BS: int, L_UE: int, n_cells: int) -> int:
    """Pilot count of a compressed-sensing per-cell channel estimate, ``L_BS L_UE ln(Q)``."""
    return round(L_BS * L_UE * math.log(n_cells))


def baseline_schedule(T_S: float, T_D: float, L_BS: int, L_UE: int, n_cells: int) -> BaselineSchedule:
    n = cs_pilot_count(L_BS, L_UE, n_cells)
    return BaselineSchedule(n * T_S, T_D, n)


def overhead(schedule: FrameSchedule | BaselineSchedule) -> float:
    return schedule.gamma


@dataclass(frozen=True)
class OverheadModel:
    gamma_proposed: float
    gamma_fs: float
    gamma_fullopt: float
    N_CE_B: int
    T_CE_B: float
    T_D_B: float


def effective_rate(snr, gamma: float) -> float:
    """``(1 - gamma)`` times the mean spectral efficiency over the SNR samples."""
    if not 0 <= gamma < 1:
        raise ValueError("overhead must lie in [0, 1)")
    snr = np.asarray(snr, dtype=float)
    if snr.size == 0:
        return float("nan")
    return float((1 - gamma) * np.mean(np.log2(1 + snr)))
