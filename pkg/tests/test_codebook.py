import math

import numpy as np
import pytest

from irs_tracking.codebook import (
    CodebookConfig,
    Codeword,
    axis_factor,
    candidate_set,
    codeword_phase,
    compute_main_lobes,
    irs_response,
    main_lobe_direction,
    main_lobe_table,
)
from irs_tracking.geometry import Direction, direction_cosines, direction_cosines_array

from oracles import double_sum_response


def random_direction(rng, limit=1.4):
    return Direction(rng.uniform(-limit, limit), rng.uniform(-limit, limit))


def test_derived_constants(ref_cb):
    assert ref_cb.delta_beta_y == pytest.approx(2 / 70)
    assert float(ref_cb.beta_y(0)) == -1.0
    assert ref_cb.g_bar == pytest.approx(math.pi, rel=1e-14)
    assert ref_cb.size == 4900


def test_phase_zero_at_origin_cell(ref_cb):
    for cw in [Codeword(0, 0), Codeword(35, 12), Codeword(69, 69)]:
        assert codeword_phase(cw, 0, 0, ref_cb) == 0.0


def test_phase_linear_term_vanishes():
    cfg = CodebookConfig(w=0.0)
    assert float(cfg.beta_y(35)) == 0.0
    for q in range(0, 100, 7):
        assert codeword_phase(Codeword(35, 3), q, 0, cfg) == 0.0


def test_phase_substitution(ref_cb):
    # each axis: -pi * [2*(2/70)/200 - 1] = pi * (1 - 1/3500)
    assert codeword_phase(Codeword(0, 0), 1, 1, ref_cb) == pytest.approx(6.281390111377535, rel=1e-14)


def test_aligned_response_reaches_full_aperture_gain():
    cfg = CodebookConfig(M_y=10, M_z=10, w=0.0)
    cw = Codeword(6, 3)
    # pick incoming/outgoing cosines summing exactly to the codeword's linear slope
    a_y, a_z = float(cfg.beta_y(6)), float(cfg.beta_z(3))
    psi_in = Direction(math.atan(a_y / math.sqrt(1 - a_y**2 - a_z**2)), math.atan(a_z / math.sqrt(1 - a_y**2 - a_z**2)))
    np.testing.assert_allclose(direction_cosines(psi_in), (a_y, a_z), atol=1e-14)
    g = irs_response(cw, psi_in, Direction(0.0, 0.0), cfg)
    assert abs(g) == pytest.approx(cfg.n_cells * cfg.g_bar, rel=1e-12)
    assert cfg.n_cells * cfg.g_bar == pytest.approx(10000 * math.pi)


def test_reference_center_codeword_matches_double_sum(ref_cb):
    cw = Codeword(35, 35)
    d0 = Direction(0.0, 0.0)
    ref = double_sum_response(cw, d0, d0, ref_cb)
    assert irs_response(cw, d0, d0, ref_cb) == pytest.approx(ref, rel=1e-9)


def test_factorized_equals_double_sum_random(ref_cb):
    rng = np.random.default_rng(7)
    worst = 0.0
    for _ in range(50):
        cw = Codeword(int(rng.integers(70)), int(rng.integers(70)))
        pi_, po = random_direction(rng), random_direction(rng)
        ref = double_sum_response(cw, pi_, po, ref_cb)
        got = irs_response(cw, pi_, po, ref_cb)
        worst = max(worst, abs(got - ref) / abs(ref))
    assert worst <= 1e-9


def test_reciprocity_and_bound(ref_cb):
    rng = np.random.default_rng(3)
    bound = ref_cb.n_cells * ref_cb.g_bar
    for _ in range(30):
        cw = Codeword(int(rng.integers(70)), int(rng.integers(70)))
        a, b = random_direction(rng), random_direction(rng)
        g1 = irs_response(cw, a, b, ref_cb)
        assert g1 == pytest.approx(irs_response(cw, b, a, ref_cb), rel=1e-12)
        assert abs(g1) <= bound * (1 + 1e-12)


def test_axis_factor_broadcasting(small_cb):
    a = np.linspace(-1.5, 1.5, 7)
    m = np.arange(small_cb.M_y)
    full = axis_factor(m[:, None], a[None, :], small_cb, "y")
    for i in (0, 5, 11):
        for j in (0, 3, 6):
            assert full[i, j] == pytest.approx(axis_factor(i, a[j], small_cb, "y"), rel=1e-12)


@pytest.mark.parametrize(
    "current,gamma,size",
    [(Codeword(35, 35), 1, 9), (Codeword(35, 35), 0, 1), (Codeword(0, 0), 1, 4), (Codeword(69, 10), 2, 15)],
)
def test_candidate_set(ref_cb, current, gamma, size):
    cands = candidate_set(current, gamma, ref_cb)
    assert len(cands) == size
    assert len(set(cands)) == size
    expected = (min(current.m_y + gamma, 69) - max(current.m_y - gamma, 0) + 1) * (
        min(current.m_z + gamma, 69) - max(current.m_z - gamma, 0) + 1
    )
    assert size == expected
    assert all(max(abs(c.m_y - current.m_y), abs(c.m_z - current.m_z)) <= gamma for c in cands)
    if gamma == 0:
        assert cands == [current]


def test_specular_main_lobe():
    cfg = CodebookConfig(M_y=10, M_z=10, Q_y=24, Q_z=24, w=0.0)
    cw = Codeword(6, 3)
    a_y, a_z = float(cfg.beta_y(6)), float(cfg.beta_z(3))
    n = math.sqrt(1 - a_y**2 - a_z**2)
    psi_in = Direction(math.atan(a_y / n), math.atan(a_z / n))
    lobe = main_lobe_direction(cw, cfg, psi_in, cache_dir=False)
    assert lobe.theta == pytest.approx(0.0, abs=1e-4)
    assert lobe.phi == pytest.approx(0.0, abs=1e-4)


def test_main_lobes_step_by_delta_beta(ref_lobes, ref_cb, geometry):
    # |F(m, a)| = |F(0, a - m*dbeta)|, so lobes of visible neighbours differ by dbeta in summed cosine
    a_in = direction_cosines(geometry.irs_aoa_los)
    a1, _ = direction_cosines_array(ref_lobes.theta[:, 35], ref_lobes.phi[:, 35])
    total = a1 + a_in[0]
    steps = np.diff(total)
    visible = np.abs(np.abs(ref_lobes.theta[:, 35]) - np.deg2rad(89.99)) > 1e-6
    ok = visible[1:] & visible[:-1] & (np.abs(steps) < 1)  # skip the aliasing wrap
    assert ok.sum() > 30
    np.testing.assert_allclose(steps[ok], ref_cb.delta_beta_y, atol=5e-4)
    assert np.all(steps[ok] > 0)


def test_center_lobe_matches_fine_grid(ref_lobes, ref_cb, geometry):
    cw = Codeword(35, 35)
    lobe = ref_lobes[cw]
    a_in = direction_cosines(geometry.irs_aoa_los)
    th = lobe.theta + np.deg2rad(np.arange(-3, 3.0001, 0.1))
    ph = lobe.phi + np.deg2rad(np.arange(-3, 3.0001, 0.1))
    T, P = np.meshgrid(th, ph, indexing="ij")
    a1, a2 = direction_cosines_array(T, P)
    gain = np.abs(axis_factor(35, a_in[0] + a1, ref_cb, "y") * axis_factor(35, a_in[1] + a2, ref_cb, "z"))
    i, j = np.unravel_index(np.argmax(gain), gain.shape)
    assert abs(T[i, j] - lobe.theta) <= np.deg2rad(0.1)
    assert abs(P[i, j] - lobe.phi) <= np.deg2rad(0.1)
    best = abs(irs_response(cw, geometry.irs_aoa_los, lobe, ref_cb))
    assert best >= ref_cb.g_bar * gain.max() * (1 - 1e-6)


def test_cache_roundtrip_and_regeneration(small_cb, tmp_path):
    psi = Direction(-0.5, 0.1)
    t1 = main_lobe_table(small_cb, psi, cache_dir=tmp_path)
    files = list(tmp_path.glob("mainlobe_*.npz"))
    assert len(files) == 1
    # corrupt the stored key: the loader must regenerate instead of trusting it
    from irs_tracking import codebook

    codebook._MEMO.clear()
    with np.load(files[0]) as data:
        np.savez(files[0], key="stale", theta=data["theta"] * 0, phi=data["phi"])
    t2 = main_lobe_table(small_cb, psi, cache_dir=tmp_path)
    np.testing.assert_array_equal(t1.theta, t2.theta)
    with np.load(files[0]) as data:
        assert str(data["key"]) != "stale"
        np.testing.assert_array_equal(data["theta"], t1.theta)
    codebook._MEMO.clear()
    t3 = main_lobe_table(small_cb, psi, cache_dir=tmp_path)
    np.testing.assert_array_equal(t1.phi, t3.phi)


def test_compute_is_deterministic(small_cb):
    psi = Direction(0.2, -0.3)
    a = compute_main_lobes(small_cb, psi)
    b = compute_main_lobes(small_cb, psi)
    np.testing.assert_array_equal(a.theta, b.theta)
