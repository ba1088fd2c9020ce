"""Flat simulation configuration with the reference scenario as defaults.

Config files are JSON objects whose keys are the field names of
:class:`SimConfig`; unknown keys are rejected.
"""
from __future__ import annotations

import json
import math
from dataclasses import asdict, dataclass, field, fields
from pathlib import Path

import numpy as np

from irs_tracking.channel import ChannelConfig, SiteGeometry
from irs_tracking.codebook import CodebookConfig
from irs_tracking.geometry import SPEED_OF_LIGHT
from irs_tracking.mobility import MobilityConfig
from irs_tracking.schedule import OverheadModel, baseline_schedule, derive_schedule

SCHEMES = ("proposed", "fs", "fullopt")


class ConfigError(ValueError):
    pass


def dbm_to_watt(dbm):
    return 10 ** ((np.asarray(dbm, dtype=float) - 30) / 10)


@dataclass(frozen=True)
class SimConfig:
    # geometry
    p_bs: tuple[float, float, float] = (0.0, 0.0, 10.0)
    p_irs: tuple[float, float, float] = (-40.0, 40.0, 5.0)
    # IRS and codebook
    Q_y: int = 100
    Q_z: int = 100
    M_y: int = 70
    M_z: int = 70
    w: float = 2.0
    # BS and channel
    N_BS_x: int = 12
    N_BS_z: int = 4
    L_BS: int = 4
    L_UE: int = 4
    K: float = 3.0
    sigma2_dbm: float = -120.0
    f_c: float = 28e9
    scatter_spread_deg: float = 60.0
    # frame structure
    T: float = 0.15
    T_CE_plus_T_D: float = 1.29e-3
    T_S: float = 4.16e-6
    N_IDE: int = 3
    N_CE: int = 1
    # tracking
    S: int = 3
    n: int = 1
    gamma: int = 1
    H: int = 11
    # mobility
    r: float = 15.0
    r_C: float = 7.5
    v_kmh: float = 5.0
    center: tuple[float, float] = (-20.0, 20.0)
    user_height: float = 1.5
    # experiment
    ptx_dbm: tuple[float, ...] = tuple(float(p) for p in range(-40, 21, 5))
    drops: int = 50
    schemes: tuple[str, ...] = SCHEMES
    fs_M_per_axis: tuple[int, ...] = (70, 80)
    seed: int = 0
    snr_def: str = "noiseless"
    cache_dir: str | None = None

    def __post_init__(self):
        for name in ("p_bs", "p_irs", "center", "ptx_dbm", "schemes", "fs_M_per_axis"):
            object.__setattr__(self, name, tuple(getattr(self, name)))
        bad = [s for s in self.schemes if s not in SCHEMES]
        if bad:
            raise ConfigError(f"unknown scheme(s) {bad}; expected a subset of {SCHEMES}")
        if self.snr_def not in ("noiseless", "noisy"):
            raise ConfigError("snr_def must be 'noiseless' or 'noisy'")
        if self.drops < 1:
            raise ConfigError("drops must be >= 1")
        if self.H < 2:
            raise ConfigError("H must be >= 2")

    # ---- derived sub-configurations -------------------------------------------------
    @property
    def wavelength(self) -> float:
        return SPEED_OF_LIGHT / self.f_c

    @property
    def sigma2(self) -> float:
        return float(dbm_to_watt(self.sigma2_dbm))

    def codebook(self, M_y: int | None = None, M_z: int | None = None) -> CodebookConfig:
        return CodebookConfig.for_carrier(
            self.f_c, M_y=M_y or self.M_y, M_z=M_z or self.M_z, Q_y=self.Q_y, Q_z=self.Q_z, w=self.w
        )

    def channel(self) -> ChannelConfig:
        return ChannelConfig(
            L_BS=self.L_BS,
            L_UE=self.L_UE,
            K=self.K,
            sigma2=self.sigma2,
            f_c=self.f_c,
            scatter_spread=float(np.deg2rad(self.scatter_spread_deg)),
            n_bs_1=self.N_BS_x,
            n_bs_2=self.N_BS_z,
        )

    def geometry(self) -> SiteGeometry:
        return SiteGeometry(self.p_bs, self.p_irs)

    def mobility(self) -> MobilityConfig:
        return MobilityConfig(self.center, self.r, self.r_C, self.v_kmh / 3.6, self.user_height)

    def schedule(self, n_ide_codewords: int | None = None):
        if n_ide_codewords is None:
            n_ide_codewords = (2 * self.gamma + 1) ** 2
        return derive_schedule(self.T, self.T_S, self.T_CE_plus_T_D, self.N_IDE, n_ide_codewords, self.N_CE)

    def fs_schedule(self, M: int):
        return self.schedule(n_ide_codewords=M)

    def baseline_schedule(self):
        T_D = self.T_CE_plus_T_D - self.N_CE * self.T_S
        return baseline_schedule(self.T_S, T_D, self.L_BS, self.L_UE, self.Q_y * self.Q_z)

    def overheads(self) -> OverheadModel:
        b = self.baseline_schedule()
        return OverheadModel(
            gamma_proposed=self.schedule().gamma,
            gamma_fs=self.fs_schedule(self.M_y * self.M_z).gamma,
            gamma_fullopt=b.gamma,
            N_CE_B=b.N_CE_B,
            T_CE_B=b.T_CE_B,
            T_D_B=b.T_D_B,
        )

    def replace(self, **kw) -> "SimConfig":
        data = asdict(self)
        data.update(kw)
        return from_dict(data)

    def to_dict(self) -> dict:
        return asdict(self)


def from_dict(data: dict) -> SimConfig:
    known = {f.name for f in fields(SimConfig)}
    unknown = sorted(set(data) - known)
    if unknown:
        raise ConfigError(f"unknown configuration key(s): {', '.join(unknown)}")
    try:
        return SimConfig(**data)
    except TypeError as exc:
        raise ConfigError(str(exc)) from exc


def load_config(path: str | Path) -> SimConfig:
    path = Path(path)
    if not path.is_file():
        raise ConfigError(f"config file not found: {path}")
    try:
        data = json.loads(path.read_text())
    except json.JSONDecodeError as exc:
        raise ConfigError(f"malformed config {path}: {exc}") from exc
    if not isinstance(data, dict):
        raise ConfigError(f"config {path} must be a JSON object")
    try:
        return from_dict(data)
    except (ConfigError, ValueError) as exc:
        raise ConfigError(f"invalid config {path}: {exc}") from exc


def derived_quantities(cfg: SimConfig) -> dict:
    ov = cfg.overheads()
    sched = cfg.schedule()
    out = {
        "wavelength_m": cfg.wavelength,
        "sigma2_w": cfg.sigma2,
        "eta": sched.eta,
        "T_IDE_s": sched.T_IDE,
        "gamma_proposed": ov.gamma_proposed,
        "gamma_fullopt": ov.gamma_fullopt,
        "N_CE_B": ov.N_CE_B,
    }
    for m in cfg.fs_M_per_axis:
        s = cfg.fs_schedule(m * m)
        out[f"eta_fs_M{m * m}"] = s.eta
        out[f"gamma_fs_M{m * m}"] = s.gamma
    out["stage_duration_s"] = (cfg.r - cfg.r_C) / (cfg.v_kmh / 3.6)
    out["codeword_width_deg"] = 180.0 / cfg.M_y
    out["ln_Q"] = math.log(cfg.Q_y * cfg.Q_z)
    return out
