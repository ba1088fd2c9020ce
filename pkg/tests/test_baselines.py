import math

import numpy as np
import pytest

from irs_tracking.baselines import (
    PerCellCascade,
    cascade_from_terms,
    fs_select,
    full_opt_amplitudes,
    full_opt_snr,
    full_search_select,
    optimal_phases,
    per_cell_cascade,
)
from irs_tracking.channel import (
    ChannelConfig,
    all_codeword_signals,
    complex_noise,
    pair_terms,
    received_symbol,
    sample_drop,
)
from irs_tracking.codebook import CodebookConfig, Codeword, codeword_phase, irs_response
from irs_tracking.geometry import Direction

USER = np.array([-18.0, 24.0, 1.5])


def phase_grid(cw, cfg):
    return codeword_phase(cw, np.arange(cfg.Q_y)[:, None], np.arange(cfg.Q_z)[None, :], cfg)


def test_cascade_reproduces_codeword_outputs(geometry, chan_cfg, ref_cb, rng):
    drop = sample_drop(geometry, USER, chan_cfg, rng)
    cascade = per_cell_cascade(drop, ref_cb)
    assert cascade.coeffs.shape == (100, 100)
    for _ in range(10):
        cw = Codeword(int(rng.integers(70)), int(rng.integers(70)))
        ref = received_symbol(cw, drop, 1.0, 0.0, ref_cb)
        assert abs(cascade.output(phase_grid(cw, ref_cb)) - ref) <= 1e-9 * abs(ref)


def test_single_cell_single_pair(geometry, rng):
    cfg = CodebookConfig.for_carrier(28e9, M_y=1, M_z=1, Q_y=1, Q_z=1)
    drop = sample_drop(geometry, USER, ChannelConfig(L_BS=1, L_UE=1), rng)
    w, _, _ = pair_terms(drop)
    cascade = per_cell_cascade(drop, cfg)
    assert cascade.coeffs[0, 0] == pytest.approx(w[0] * cfg.g_bar, rel=1e-12)
    snr = full_opt_snr(cascade, 2.0, 1e-15)
    assert snr == pytest.approx(abs(cascade.coeffs[0, 0]) ** 2 * 2.0 / 1e-15, rel=1e-12)


def test_los_only_cascade_has_constant_magnitude(geometry, ref_cb, rng):
    drop = sample_drop(geometry, USER, ChannelConfig(L_BS=1, L_UE=1), rng)
    mags = np.abs(per_cell_cascade(drop, ref_cb).coeffs)
    np.testing.assert_allclose(mags, mags[0, 0], rtol=1e-12)


def test_real_positive_cascade_needs_no_phase():
    cascade = PerCellCascade(np.array([[1.0, 2.0], [0.5, 3.0]], dtype=complex))
    np.testing.assert_array_equal(optimal_phases(cascade), 0.0)
    assert full_opt_snr(cascade, 1.0, 1.0) == pytest.approx(6.5**2)


def test_optimal_phases_achieve_bound(geometry, chan_cfg, small_cb, rng):
    drop = sample_drop(geometry, USER, chan_cfg, rng)
    cascade = per_cell_cascade(drop, small_cb)
    out = cascade.output(optimal_phases(cascade))
    assert out.imag == pytest.approx(0.0, abs=1e-9 * abs(out))
    assert abs(out) ** 2 == pytest.approx(full_opt_snr(cascade, 1.0, 1.0), rel=1e-12)
    for _ in range(20):
        random = cascade.output(rng.uniform(0, 2 * np.pi, cascade.coeffs.shape))
        assert abs(random) <= abs(out)


def test_upper_bound_over_codebook(geometry, chan_cfg, ref_cb):
    rng = np.random.default_rng(21)
    for _ in range(5):
        pos = np.array([rng.uniform(-33, -7), rng.uniform(7, 33), 1.5])
        drop = sample_drop(geometry, pos, chan_cfg, rng)
        terms = pair_terms(drop)
        best = np.abs(all_codeword_signals(*terms, ref_cb)).max()
        amp = full_opt_amplitudes(*terms, ref_cb)[0]
        assert amp >= best
        assert amp**2 == pytest.approx(full_opt_snr(per_cell_cascade(drop, ref_cb), 1.0, 1.0), rel=1e-10)


def test_batched_amplitudes_match_loop(geometry, chan_cfg, small_cb, rng):
    drops = [sample_drop(geometry, USER, chan_cfg, rng) for _ in range(5)]
    terms = [pair_terms(d) for d in drops]
    w, ay, az = (np.stack(x) for x in zip(*terms))
    batched = full_opt_amplitudes(w, ay, az, small_cb, chunk=2)
    single = [np.abs(cascade_from_terms(*t, small_cb)).sum() for t in terms]
    np.testing.assert_allclose(batched, single, rtol=1e-12)


def test_fs_noise_free_los_picks_strongest(geometry, ref_cb, rng):
    drop = sample_drop(geometry, USER, ChannelConfig(L_BS=1, L_UE=1), rng)
    cw = full_search_select(drop, np.ones(3), ref_cb)
    aoa, aod = Direction(*drop.irs_aoas[0]), Direction(*drop.irs_aods[0])
    gains = np.array([[abs(irs_response(Codeword(a, b), aoa, aod, ref_cb)) for b in range(70)] for a in range(70)])
    assert (cw.m_y, cw.m_z) == np.unravel_index(np.argmax(gains), gains.shape)


def test_fs_single_codeword(geometry, chan_cfg, rng):
    cfg = CodebookConfig.for_carrier(28e9, M_y=1, M_z=1, Q_y=8, Q_z=8)
    drop = sample_drop(geometry, USER, chan_cfg, rng)
    assert full_search_select(drop, np.ones(3), cfg, 1.0, rng) == Codeword(0, 0)


def test_fs_noisy_replay():
    signals = np.array([[1.0, 0.2], [0.9, 0.1]], dtype=complex)
    pilot = np.array([1.0, -1.0, 1j])
    got = fs_select(signals, pilot, 0.5, np.random.default_rng(3))
    noise = complex_noise(np.random.default_rng(3), 0.5, (4, 3))
    energy = np.sum(np.abs(signals.reshape(-1, 1) * pilot + noise) ** 2, axis=1)
    assert got == int(np.argmax(energy))
