"""Geometry-based Rician channel through the IRS and received-signal synthesis.

Every BS->IRS path ``i`` is paired with every IRS->user path ``j``; path
index 0 is the line-of-sight path on both links.  Large-scale amplitudes
follow Friis (``lambda / (4 pi d)``) per link, the NLoS paths share the
remaining power equally so that the LoS-to-NLoS power ratio equals ``K``.
"""
from __future__ import annotations

from dataclasses import dataclass, field, replace

import numpy as np

from irs_tracking.codebook import CodebookConfig, Codeword, axis_factor, axis_factor_matrix, irs_response
from irs_tracking.geometry import (
    BS_FRAME,
    IRS_FRAME,
    SPEED_OF_LIGHT,
    Direction,
    PlaneFrame,
    direction_cosines,
    direction_cosines_array,
    direction_from_vector,
    directions_from_vectors,
    upa_steering_vector,
)


@dataclass(frozen=True)
class ChannelConfig:
    L_BS: int = 4
    L_UE: int = 4
    K: float = 3.0
    sigma2: float = 1e-15
    P_TX: float = 1.0
    f_c: float = 28e9
    scatter_spread: float = float(np.deg2rad(60.0))
    n_bs_1: int = 12
    n_bs_2: int = 4
    bs_spacing: float | None = None  # defaults to half a wavelength

    def __post_init__(self):
        if self.L_BS < 1 or self.L_UE < 1:
            raise ValueError("path counts must be >= 1")
        if self.K <= 0 or self.sigma2 <= 0 or self.P_TX <= 0:
            raise ValueError("K, sigma2 and P_TX must be positive")
        if not 0 < self.scatter_spread < np.pi / 2:
            raise ValueError("scatter_spread must lie in (0, pi/2)")

    @property
    def wavelength(self) -> float:
        return SPEED_OF_LIGHT / self.f_c

    @property
    def n_bs(self) -> int:
        return self.n_bs_1 * self.n_bs_2

    @property
    def element_spacing(self) -> float:
        return self.bs_spacing if self.bs_spacing is not None else self.wavelength / 2


@dataclass(frozen=True)
class SiteGeometry:
    p_bs: tuple[float, float, float] = (0.0, 0.0, 10.0)
    p_irs: tuple[float, float, float] = (-40.0, 40.0, 5.0)
    bs_frame: PlaneFrame = BS_FRAME
    irs_frame: PlaneFrame = IRS_FRAME

    @property
    def bs_irs_distance(self) -> float:
        return float(np.linalg.norm(np.subtract(self.p_irs, self.p_bs)))

    @property
    def bs_aod_los(self) -> Direction:
        return direction_from_vector(np.subtract(self.p_irs, self.p_bs), self.bs_frame)

    @property
    def irs_aoa_los(self) -> Direction:
        """Direction of the BS seen from the IRS (the known incoming direction)."""
        return direction_from_vector(np.subtract(self.p_bs, self.p_irs), self.irs_frame)

    def user_direction(self, position) -> Direction:
        return direction_from_vector(np.subtract(position, self.p_irs), self.irs_frame)


def friis_amplitude(distance, wavelength: float):
    distance = np.asarray(distance, dtype=float)
    if np.any(distance <= 0):
        raise ValueError("zero propagation distance")
    return wavelength / (4 * np.pi * distance)


def rician_gains(los_amplitude, n_paths: int, K: float) -> np.ndarray:
    """Path amplitudes with ``n_paths - 1`` equal-power NLoS paths at ratio ``K``."""
    los_amplitude = np.asarray(los_amplitude, dtype=float)
    nlos = los_amplitude / np.sqrt(K * max(n_paths - 1, 1))
    out = np.repeat(nlos[..., None], n_paths, axis=-1)
    out[..., 0] = los_amplitude
    return out


def _frozen(a) -> np.ndarray:
    a = np.array(a)
    a.setflags(write=False)
    return a


@dataclass(frozen=True)
class ChannelDrop:
    """One channel realization. Directions are stored as ``(L, 2)`` (theta, phi) arrays."""

    bs_aods: np.ndarray
    irs_aoas: np.ndarray
    irs_aods: np.ndarray
    gains_bs: np.ndarray
    gains_ue: np.ndarray
    phases_ue: np.ndarray
    beamformer_gain_per_path: np.ndarray

    def __post_init__(self):
        for name in self.__dataclass_fields__:
            object.__setattr__(self, name, _frozen(getattr(self, name)))

    @property
    def L_BS(self) -> int:
        return len(self.gains_bs)

    @property
    def L_UE(self) -> int:
        return len(self.gains_ue)


def _angles(dirs) -> np.ndarray:
    return np.array([[d.theta, d.phi] for d in dirs], dtype=float).reshape(-1, 2)


def _random_angles(rng: np.random.Generator, n: int, spread: float) -> np.ndarray:
    return rng.uniform(-spread, spread, size=(n, 2))


def beamformer_gains(bs_aods: np.ndarray, cfg: ChannelConfig) -> np.ndarray:
    """``d_i^H f`` for the unit-norm beamformer ``f = d_1 / sqrt(N_BS)``."""
    steer = np.stack(
        [
            upa_steering_vector(Direction(*ang), cfg.n_bs_1, cfg.n_bs_2, cfg.element_spacing, cfg.wavelength)
            for ang in bs_aods
        ]
    )
    f = steer[0] / np.sqrt(cfg.n_bs)
    return steer.conj() @ f


def sample_drop(geometry: SiteGeometry, user_position, cfg: ChannelConfig, rng: np.random.Generator) -> ChannelDrop:
    """Draw NLoS angles and initial small-scale phases; LoS angles follow from the geometry."""
    lam = cfg.wavelength
    user_position = np.asarray(user_position, dtype=float)
    d_ue = float(np.linalg.norm(user_position - np.asarray(geometry.p_irs)))
    psi_ue = geometry.user_direction(user_position)

    bs_aods = np.vstack([_angles([geometry.bs_aod_los]), _random_angles(rng, cfg.L_BS - 1, cfg.scatter_spread)])
    irs_aoas = np.vstack([_angles([geometry.irs_aoa_los]), _random_angles(rng, cfg.L_BS - 1, cfg.scatter_spread)])
    irs_aods = np.vstack([_angles([psi_ue]), _random_angles(rng, cfg.L_UE - 1, cfg.scatter_spread)])
    return ChannelDrop(
        bs_aods=bs_aods,
        irs_aoas=irs_aoas,
        irs_aods=irs_aods,
        gains_bs=rician_gains(friis_amplitude(geometry.bs_irs_distance, lam), cfg.L_BS, cfg.K),
        gains_ue=rician_gains(friis_amplitude(d_ue, lam), cfg.L_UE, cfg.K),
        phases_ue=np.exp(1j * rng.uniform(0, 2 * np.pi, cfg.L_UE)),
        beamformer_gain_per_path=beamformer_gains(bs_aods, cfg),
    )


def refresh_small_scale(drop: ChannelDrop, rng: np.random.Generator) -> ChannelDrop:
    """New coherence block: redraw all IRS->user path phases, keep angles and magnitudes."""
    return replace(drop, phases_ue=np.exp(1j * rng.uniform(0, 2 * np.pi, drop.L_UE)))


def relocate_user(drop: ChannelDrop, geometry: SiteGeometry, user_position, cfg: ChannelConfig) -> ChannelDrop:
    """Move the user: updates the LoS departure direction and the IRS->user amplitudes."""
    user_position = np.asarray(user_position, dtype=float)
    d_ue = float(np.linalg.norm(user_position - np.asarray(geometry.p_irs)))
    aods = np.array(drop.irs_aods)
    aods[0] = _angles([geometry.user_direction(user_position)])[0]
    return replace(
        drop, irs_aods=aods, gains_ue=rician_gains(friis_amplitude(d_ue, cfg.wavelength), drop.L_UE, cfg.K)
    )


def received_symbol(cw: Codeword, drop: ChannelDrop, symbol: complex, noise: complex, cb: CodebookConfig) -> complex:
    """Received sample for codeword ``cw``: sum over all BS-path / user-path pairs."""
    total = 0j
    for j in range(drop.L_UE):
        psi_out = Direction(*drop.irs_aods[j])
        for i in range(drop.L_BS):
            g = irs_response(cw, Direction(*drop.irs_aoas[i]), psi_out, cb)
            total += (
                drop.phases_ue[j] * drop.gains_ue[j] * g * drop.gains_bs[i] * drop.beamformer_gain_per_path[i]
            )
    return total * symbol + noise


def effective_los_gain(drop: ChannelDrop) -> complex:
    """Composite LoS gain ``a_1 [Sigma_UE]_11 [Sigma_BS]_11 d_1^H f``."""
    return complex(drop.phases_ue[0] * drop.gains_ue[0] * drop.gains_bs[0] * drop.beamformer_gain_per_path[0])


def pair_terms(drop: ChannelDrop) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Per path-pair weights and summed direction cosines, flattened ``(L_BS * L_UE,)`` BS-path major."""
    ay_in, az_in = direction_cosines_array(drop.irs_aoas[:, 0], drop.irs_aoas[:, 1])
    ay_out, az_out = direction_cosines_array(drop.irs_aods[:, 0], drop.irs_aods[:, 1])
    w_bs = drop.gains_bs * drop.beamformer_gain_per_path
    w_ue = drop.phases_ue * drop.gains_ue
    weights = np.outer(w_bs, w_ue).ravel()
    a_y = np.add.outer(ay_in, ay_out).ravel()
    a_z = np.add.outer(az_in, az_out).ravel()
    return weights, a_y, a_z


def codeword_signals(weights, a_y, a_z, m_y, m_z, cb: CodebookConfig) -> np.ndarray:
    """Noiseless unit-symbol output for per-row codewords.

    ``weights``, ``a_y``, ``a_z`` have shape ``(..., P)``; ``m_y``, ``m_z`` shape ``(...)``.
    """
    m_y = np.asarray(m_y)[..., None]
    m_z = np.asarray(m_z)[..., None]
    g = cb.g_bar * axis_factor(m_y, a_y, cb, "y") * axis_factor(m_z, a_z, cb, "z")
    return (np.asarray(weights) * g).sum(axis=-1)


def all_codeword_signals(weights, a_y, a_z, cb: CodebookConfig) -> np.ndarray:
    """Noiseless unit-symbol output of every codeword for one channel state; ``(M_y, M_z)``."""
    fy = axis_factor_matrix(a_y, cb, "y")
    fz = axis_factor_matrix(a_z, cb, "z")
    return cb.g_bar * (fy * np.asarray(weights)) @ fz.T


@dataclass(frozen=True)
class DropProcess:
    """Static part of a drop; produces channel states as the user moves and fading evolves."""

    geometry: SiteGeometry
    cfg: ChannelConfig
    base: ChannelDrop = field(repr=False)

    @classmethod
    def sample(cls, geometry: SiteGeometry, start_position, cfg: ChannelConfig, rng) -> "DropProcess":
        return cls(geometry, cfg, sample_drop(geometry, start_position, cfg, rng))

    def drop_at(self, position, phases=None) -> ChannelDrop:
        drop = relocate_user(self.base, self.geometry, position, self.cfg)
        if phases is not None:
            drop = replace(drop, phases_ue=np.asarray(phases))
        return drop

    def pair_terms_at(self, positions, phases) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
        """Batched ``pair_terms`` for positions ``(F, 3)`` and phases ``(F, L_UE)``."""
        positions = np.atleast_2d(np.asarray(positions, dtype=float))
        phases = np.atleast_2d(phases)
        rel = positions - np.asarray(self.geometry.p_irs)
        th, ph = directions_from_vectors(rel, self.geometry.irs_frame)
        ay_los, az_los = direction_cosines_array(th, ph)
        base = self.base
        ay_nl, az_nl = direction_cosines_array(base.irs_aods[1:, 0], base.irs_aods[1:, 1])
        n = len(positions)
        ay_out = np.hstack([ay_los[:, None], np.broadcast_to(ay_nl, (n, base.L_UE - 1))])
        az_out = np.hstack([az_los[:, None], np.broadcast_to(az_nl, (n, base.L_UE - 1))])
        ay_in, az_in = direction_cosines_array(base.irs_aoas[:, 0], base.irs_aoas[:, 1])

        amp = rician_gains(friis_amplitude(np.linalg.norm(rel, axis=1), self.cfg.wavelength), base.L_UE, self.cfg.K)
        w_ue = phases * amp
        w_bs = base.gains_bs * base.beamformer_gain_per_path
        weights = (w_bs[None, :, None] * w_ue[:, None, :]).reshape(n, -1)
        a_y = (ay_in[None, :, None] + ay_out[:, None, :]).reshape(n, -1)
        a_z = (az_in[None, :, None] + az_out[:, None, :]).reshape(n, -1)
        return weights, a_y, a_z


def complex_noise(rng: np.random.Generator, sigma2: float, shape) -> np.ndarray:
    """Circularly-symmetric complex Gaussian samples of variance ``sigma2``."""
    return np.sqrt(sigma2 / 2) * (rng.standard_normal(shape) + 1j * rng.standard_normal(shape))


def direction_cosine_sums(psi_in: Direction, psi_out: Direction) -> tuple[float, float]:
    ai = direction_cosines(psi_in)
    ao = direction_cosines(psi_out)
    return ai[0] + ao[0], ai[1] + ao[1]
