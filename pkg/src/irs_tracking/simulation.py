"""Monte-Carlo orchestration of the tracking scheme and the two reference schemes.

Every drop owns independent seeded streams (mobility, scatterers, fading,
noise).  Small-scale fading is a function of absolute time on a grid of
coherence blocks of length ``T_CE + T_D``, and every scheme draws its noise
from identically seeded streams, so all schemes and power points of a drop
see common random numbers.
"""
from __future__ import annotations

import logging
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from irs_tracking.baselines import fs_select, full_opt_amplitudes
from irs_tracking.channel import DropProcess, all_codeword_signals, codeword_signals, complex_noise
from irs_tracking.codebook import CodebookConfig, Codeword, MainLobeTable, main_lobe_table
from irs_tracking.config import SimConfig, dbm_to_watt
from irs_tracking.geometry import directions_from_vectors
from irs_tracking.mobility import build_trajectory
from irs_tracking.schedule import effective_rate
from irs_tracking.tracking import DegenerateHypothesis, IdeMeasurement, Tracker, select_codewords

log = logging.getLogger(__name__)

_STREAMS = {"mobility": 0, "scatter": 1, "fading": 2, "ide_noise": 3, "data_noise": 4}


@dataclass
class Trace:
    """Per-D-frame record of one scheme on one drop at one transmit power."""

    scheme: str
    drop: int
    ptx_dbm: float
    gamma: float
    t: np.ndarray
    block: np.ndarray
    m_y: np.ndarray
    m_z: np.ndarray
    true_angles: np.ndarray
    pred_angles: np.ndarray
    snr: np.ndarray
    snr_noisy: np.ndarray
    snr_def: str = "noiseless"

    @property
    def reported_snr(self) -> np.ndarray:
        return self.snr if self.snr_def == "noiseless" else self.snr_noisy

    @property
    def rate(self) -> np.ndarray:
        return (1 - self.gamma) * np.log2(1 + self.reported_snr)

    @property
    def effective_rate(self) -> float:
        return effective_rate(self.reported_snr, self.gamma)

    def __len__(self) -> int:
        return len(self.t)


def _empty_trace(scheme, drop, ptx_dbm, gamma, snr_def) -> Trace:
    e = np.empty(0)
    ei = np.empty(0, dtype=int)
    return Trace(scheme, drop, ptx_dbm, gamma, e, ei, ei, ei, np.empty((0, 2)), np.empty((0, 2)), e, e, snr_def)


class DropContext:
    """One Monte-Carlo drop: trajectory, scatterers, fading process and noise streams."""

    def __init__(self, cfg: SimConfig, drop_idx: int, trajectory=None):
        self.cfg = cfg
        self.drop_idx = drop_idx
        self.geometry = cfg.geometry()
        self.channel_cfg = cfg.channel()
        self.T_coh = cfg.T_CE_plus_T_D
        self.trajectory = trajectory if trajectory is not None else build_trajectory(
            cfg.mobility(), self._rng("mobility")
        )
        duration = self.trajectory.total_duration
        self.n_blocks = int(math.floor(duration / cfg.T + 1e-9)) if duration > 0 else 0
        self.horizon = self.n_blocks * cfg.T
        self.process = DropProcess.sample(
            self.geometry, self.trajectory.positions(0.0), self.channel_cfg, self._rng("scatter")
        )
        n_fade = int(math.floor(self.horizon / self.T_coh)) + 2
        self.phases = np.exp(1j * self._rng("fading").uniform(0, 2 * np.pi, (n_fade, self.channel_cfg.L_UE)))
        self._fullopt = None

    def _rng(self, stream: str) -> np.random.Generator:
        ss = np.random.SeedSequence([self.cfg.seed, self.drop_idx, _STREAMS[stream]])
        return np.random.Generator(np.random.PCG64(ss))

    def noise_rng(self, stream: str = "ide_noise") -> np.random.Generator:
        """Fresh generator; identical for every scheme and power point of this drop."""
        return self._rng(stream)

    def fading_index(self, times) -> np.ndarray:
        return np.floor(np.asarray(times) / self.T_coh + 1e-9).astype(int)

    def terms(self, times):
        times = np.atleast_1d(np.asarray(times, dtype=float))
        return self.process.pair_terms_at(self.trajectory.positions(times), self.phases[self.fading_index(times)])

    def true_angles(self, times) -> np.ndarray:
        pos = self.trajectory.positions(np.atleast_1d(np.asarray(times, dtype=float)))
        th, ph = directions_from_vectors(pos - np.asarray(self.geometry.p_irs), self.geometry.irs_frame)
        return np.stack([th, ph], axis=-1)

    def fullopt_amplitudes(self, cb: CodebookConfig):
        """Data-frame times of the per-cell baseline and its optimal unit-symbol amplitudes."""
        if self._fullopt is None:
            times = self.cfg.baseline_schedule().d_starts(self.horizon)
            amps = full_opt_amplitudes(*self.terms(times), cb) if len(times) else np.empty(0)
            self._fullopt = (times, amps)
        return self._fullopt

    def fullopt_amplitudes_at(self, times, cb: CodebookConfig) -> np.ndarray:
        return full_opt_amplitudes(*self.terms(times), cb)

    def summary(self) -> dict:
        return {"drop": self.drop_idx, "n_blocks": self.n_blocks, **self.trajectory.summary()}


def _snr_pair(sig, ptx_w, sigma2, rng):
    amp = sig * np.sqrt(ptx_w)
    snr = np.abs(amp) ** 2 / sigma2
    noisy = np.abs(amp + complex_noise(rng, sigma2, amp.shape)) ** 2 / sigma2
    return snr, noisy


def _finish(scheme, ctx, ptx_dbm, gammas, parts) -> Trace:
    if not parts:
        return _empty_trace(scheme, ctx.drop_idx, ptx_dbm, 0.0, ctx.cfg.snr_def)
    cols = list(zip(*parts))
    return Trace(
        scheme,
        ctx.drop_idx,
        float(ptx_dbm),
        float(np.mean(gammas)),
        *(np.concatenate(c) for c in cols),
        snr_def=ctx.cfg.snr_def,
    )


def simulate_proposed(ctx: DropContext, ptx_dbm: float, cb: CodebookConfig, main_lobes: MainLobeTable, initial=None) -> Trace:
    """Run the tracking loop block by block over the drop."""
    cfg = ctx.cfg
    ptx_w = float(dbm_to_watt(ptx_dbm))
    sigma2 = cfg.sigma2
    pilot = np.full(cfg.N_IDE, np.sqrt(ptx_w), dtype=complex)
    ide_rng = ctx.noise_rng("ide_noise")
    data_rng = ctx.noise_rng("data_noise")
    psi_bs = ctx.geometry.irs_aoa_los
    if ctx.n_blocks == 0:
        return _finish("proposed", ctx, ptx_dbm, [], [])
    if initial is None:
        initial = Codeword(*divmod(int(select_codewords(ctx.true_angles(0.0), main_lobes)[0]), cb.M_z))
    tracker = Tracker(cb, main_lobes, psi_bs, initial, cfg.gamma, cfg.H, cfg.S, cfg.n)

    gammas, parts = [], []
    for k in range(ctx.n_blocks):
        t_k = k * cfg.T
        cands = tracker.candidates()
        w, a_y, a_z = ctx.terms(t_k)
        m_y = np.array([c.m_y for c in cands])
        m_z = np.array([c.m_z for c in cands])
        sig = codeword_signals(w, a_y, a_z, m_y, m_z, cb)
        y = sig[:, None] * pilot[None, :] + complex_noise(ide_rng, sigma2, (len(cands), cfg.N_IDE))
        meas = [
            IdeMeasurement(c, y[i], pilot, t_k + i * cfg.N_IDE * cfg.T_S) for i, c in enumerate(cands)
        ]
        try:
            tracker.update(t_k, meas)
        except DegenerateHypothesis:
            log.warning("drop %d block %d: all hypotheses degenerate, keeping previous fit", ctx.drop_idx, k)
            if tracker.poly is None:
                raise

        sched = cfg.schedule(len(cands))
        ce = sched.ce_starts(t_k)
        d = ce + sched.T_CE
        idx, pred = tracker.select(ce)
        sel_y, sel_z = np.divmod(idx, cb.M_z)
        sig = codeword_signals(*ctx.terms(d), sel_y, sel_z, cb)
        snr, noisy = _snr_pair(sig, ptx_w, sigma2, data_rng)
        gammas.append(sched.gamma)
        parts.append((d, np.full(len(d), k), sel_y, sel_z, ctx.true_angles(d), pred, snr, noisy))
    return _finish("proposed", ctx, ptx_dbm, gammas, parts)


@dataclass
class _FsBlock:
    signals: np.ndarray
    d_times: np.ndarray
    terms: tuple


def prepare_fs(ctx: DropContext, cb: CodebookConfig) -> list[_FsBlock]:
    """Power-independent part of the full-search baseline: all codeword outputs per block."""
    cfg = ctx.cfg
    sched = cfg.fs_schedule(cb.size)
    blocks = []
    for k in range(ctx.n_blocks):
        t_k = k * cfg.T
        w, a_y, a_z = ctx.terms(t_k)
        d = sched.d_starts(t_k)
        blocks.append(_FsBlock(all_codeword_signals(w[0], a_y[0], a_z[0], cb), d, ctx.terms(d)))
    return blocks


def simulate_fs(ctx: DropContext, ptx_dbm: float, cb: CodebookConfig, prepared=None, label: str | None = None) -> Trace:
    """Full codebook sweep in every IDE frame; the strongest codeword is held for the block."""
    cfg = ctx.cfg
    label = label or f"fs_M{cb.size}"
    prepared = prepared if prepared is not None else prepare_fs(ctx, cb)
    ptx_w = float(dbm_to_watt(ptx_dbm))
    pilot = np.full(cfg.N_IDE, np.sqrt(ptx_w), dtype=complex)
    ide_rng = ctx.noise_rng("ide_noise")
    data_rng = ctx.noise_rng("data_noise")
    gamma = cfg.fs_schedule(cb.size).gamma
    parts = []
    for k, blk in enumerate(prepared):
        flat = fs_select(blk.signals, pilot, cfg.sigma2, ide_rng)
        sel_y, sel_z = divmod(flat, cb.M_z)
        n = len(blk.d_times)
        sy = np.full(n, sel_y)
        sz = np.full(n, sel_z)
        sig = codeword_signals(*blk.terms, sy, sz, cb)
        snr, noisy = _snr_pair(sig, ptx_w, cfg.sigma2, data_rng)
        nan = np.full((n, 2), np.nan)
        parts.append((blk.d_times, np.full(n, k), sy, sz, ctx.true_angles(blk.d_times), nan, snr, noisy))
    return _finish(label, ctx, ptx_dbm, [gamma] * max(len(parts), 1), parts)


def simulate_fullopt(ctx: DropContext, ptx_dbm: float, cb: CodebookConfig) -> Trace:
    """Per-cell phase optimization from perfect CSI before every data frame."""
    cfg = ctx.cfg
    ptx_w = float(dbm_to_watt(ptx_dbm))
    times, amps = ctx.fullopt_amplitudes(cb)
    gamma = cfg.baseline_schedule().gamma
    if len(times) == 0:
        return _empty_trace("fullopt", ctx.drop_idx, ptx_dbm, gamma, cfg.snr_def)
    # co-phased cells: the noiseless output is real and positive
    snr, noisy = _snr_pair(amps.astype(complex), ptx_w, cfg.sigma2, ctx.noise_rng("data_noise"))
    n = len(times)
    block = np.floor(times / cfg.T + 1e-9).astype(int)
    neg = np.full(n, -1)
    nan = np.full((n, 2), np.nan)
    return Trace("fullopt", ctx.drop_idx, float(ptx_dbm), gamma, times, block, neg, neg,
                 ctx.true_angles(times), nan, snr, noisy, cfg.snr_def)


# ---- run orchestration --------------------------------------------------------------


@dataclass
class RunResult:
    config: dict
    derived: dict
    traces: list[Trace] = field(default_factory=list)
    drops: list[dict] = field(default_factory=list)

    def schemes(self) -> list[str]:
        seen = []
        for tr in self.traces:
            if tr.scheme not in seen:
                seen.append(tr.scheme)
        return seen

    def select(self, scheme: str, ptx_dbm: float | None = None) -> list[Trace]:
        return [
            tr for tr in self.traces if tr.scheme == scheme and (ptx_dbm is None or tr.ptx_dbm == ptx_dbm)
        ]

    def mean_rate(self, scheme: str, ptx_dbm: float) -> float:
        return float(np.mean([tr.effective_rate for tr in self.select(scheme, ptx_dbm) if len(tr)]))

    def summary(self) -> list[dict]:
        """Mean effective rate over drops per (scheme, power) with a normal-approximation 95% CI."""
        rows = []
        for scheme in self.schemes():
            for ptx in sorted({tr.ptx_dbm for tr in self.select(scheme)}):
                trs = [tr for tr in self.select(scheme, ptx) if len(tr)]
                if not trs:
                    continue
                rates = np.array([tr.effective_rate for tr in trs])
                ci = 1.96 * rates.std(ddof=1) / np.sqrt(len(rates)) if len(rates) > 1 else float("nan")
                rows.append({
                    "scheme": scheme,
                    "ptx_dbm": ptx,
                    "gamma": float(np.mean([tr.gamma for tr in trs])),
                    "mean_eff_rate_bpshz": float(rates.mean()),
                    "ci95": float(ci),
                })
        return rows


def load_tables(cfg: SimConfig, schemes) -> dict:
    """Main-lobe tables needed by the run, computed (or loaded) once up front."""
    tables = {}
    if "proposed" in schemes:
        cb = cfg.codebook()
        cache = cfg.cache_dir if cfg.cache_dir is not None else None
        tables["proposed"] = main_lobe_table(cb, cfg.geometry().irs_aoa_los, cache_dir=cache)
    return tables


def simulate_drop(cfg: SimConfig, drop_idx: int, schemes, tables: dict, trajectory=None):
    ctx = DropContext(cfg, drop_idx, trajectory)
    cb = cfg.codebook()
    traces = []
    if "proposed" in schemes:
        for p in cfg.ptx_dbm:
            traces.append(simulate_proposed(ctx, p, cb, tables["proposed"]))
    if "fs" in schemes:
        for m in cfg.fs_M_per_axis:
            fs_cb = cfg.codebook(m, m)
            prepared = prepare_fs(ctx, fs_cb)
            for p in cfg.ptx_dbm:
                traces.append(simulate_fs(ctx, p, fs_cb, prepared))
    if "fullopt" in schemes:
        for p in cfg.ptx_dbm:
            traces.append(simulate_fullopt(ctx, p, cb))
    return traces, ctx.summary()


def _drop_job(args):
    return simulate_drop(*args)


def run(cfg: SimConfig, schemes=None, jobs: int = 1, trajectory=None, progress=None) -> RunResult:
    """Simulate ``cfg.drops`` drops for the selected schemes; results are ordered by drop index."""
    from irs_tracking.config import derived_quantities

    schemes = tuple(schemes or cfg.schemes)
    tables = load_tables(cfg, schemes)
    result = RunResult(cfg.to_dict(), derived_quantities(cfg))
    jobs_args = [(cfg, i, schemes, tables, trajectory) for i in range(cfg.drops)]
    if jobs > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            outputs = list(pool.map(_drop_job, jobs_args))
    else:
        outputs = []
        for a in jobs_args:
            outputs.append(_drop_job(a))
            if progress:
                progress(a[1])
    for traces, meta in outputs:
        result.traces.extend(traces)
        result.drops.append(meta)
    return result


def run_tracking(cfg: SimConfig, **kw) -> RunResult:
    return run(cfg, ("proposed",), **kw)


def run_baseline_fs(cfg: SimConfig, **kw) -> RunResult:
    return run(cfg, ("fs",), **kw)


def run_baseline_fullopt(cfg: SimConfig, **kw) -> RunResult:
    return run(cfg, ("fullopt",), **kw)
