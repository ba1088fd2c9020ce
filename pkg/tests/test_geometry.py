import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from irs_tracking.geometry import (
    BS_FRAME,
    IRS_FRAME,
    Direction,
    PlaneFrame,
    direction_cosines,
    direction_from_vector,
    unit_vector,
    upa_steering_vector,
)

from conftest import LAMBDA

open_angle = st.floats(min_value=-1.55, max_value=1.55, allow_nan=False)


def test_broadside():
    assert direction_from_vector(IRS_FRAME.normal_u3, IRS_FRAME) == Direction(0.0, 0.0)


def test_45_degree_ray():
    u1 = np.array(IRS_FRAME.axis_u1)
    u3 = np.array(IRS_FRAME.normal_u3)
    d = direction_from_vector((u1 + u3) / math.sqrt(2), IRS_FRAME)
    assert d.theta == pytest.approx(math.pi / 4, abs=1e-15)
    assert d.phi == pytest.approx(0.0, abs=1e-15)


def test_user_offset_from_irs():
    p_irs = np.array([-40.0, 40.0, 5.0])
    user = np.array([-40.0 + 3, 40.0, 5.0 + 4])
    d = direction_from_vector(user - p_irs, IRS_FRAME)
    # IRS frame: u1 = y (0), u2 = z (4), u3 = x (3)
    assert d.theta == pytest.approx(0.0, abs=1e-15)
    assert d.phi == pytest.approx(0.9272952180016122, rel=1e-14)


@pytest.mark.parametrize("v", [(-1.0, 0.0, 0.0), (0.0, 1.0, 1.0), (0.0, 0.0, 0.0)])
def test_rejects_vectors_behind_the_array(v):
    with pytest.raises(ValueError):
        direction_from_vector(v, IRS_FRAME)


def test_frames_are_orthonormal_right_handed():
    for frame in (IRS_FRAME, BS_FRAME):
        m = frame.matrix
        np.testing.assert_allclose(m @ m.T, np.eye(3), atol=1e-15)
        np.testing.assert_allclose(np.cross(m[0], m[1]), m[2], atol=1e-15)
    with pytest.raises(ValueError):
        PlaneFrame((1.0, 0.0, 0.0), (0.0, 1.0, 0.0), (0.0, 0.0, -1.0))


def test_direction_domain():
    with pytest.raises(ValueError):
        Direction(math.pi / 2, 0.0)


def test_direction_cosines_examples():
    assert direction_cosines(Direction(0.0, 0.0)) == (0.0, 0.0)
    a1, a2 = direction_cosines(Direction(math.pi / 4, 0.0))
    assert a1 == pytest.approx(1 / math.sqrt(2), abs=1e-15)
    assert a2 == 0.0


def test_direction_cosines_30_20():
    # projection values computed independently; the angle-composition formulas
    # (elevation alpha, azimuth eps measured from u2) give the same pair with axes swapped
    a1, a2 = direction_cosines(Direction.from_degrees(30, 20))
    assert a1 == pytest.approx(0.4768709627114737, rel=1e-13)
    assert a2 == pytest.approx(0.3006265784832223, rel=1e-13)


def _composition_cosines(theta, phi):
    alpha = math.atan(math.sqrt(math.tan(phi) ** 2 + math.tan(theta) ** 2))
    eps = math.atan(math.tan(theta) / math.tan(phi)) + math.pi / 2 * (1 - np.sign(math.tan(phi)))
    return math.sin(alpha) * math.cos(eps), math.sin(alpha) * math.sin(eps)


@settings(max_examples=200, deadline=None)
@given(open_angle, open_angle)
def test_projection_matches_angle_composition(theta, phi):
    if abs(phi) < 1e-3:
        return  # removable singularity of the azimuth formula
    a1, a2 = direction_cosines(Direction(theta, phi))
    c_u2, c_u1 = _composition_cosines(theta, phi)
    assert a1 == pytest.approx(c_u1, abs=1e-10)
    assert a2 == pytest.approx(c_u2, abs=1e-10)
    alpha = math.atan(math.sqrt(math.tan(phi) ** 2 + math.tan(theta) ** 2))
    assert a1**2 + a2**2 == pytest.approx(math.sin(alpha) ** 2, abs=1e-10)


@settings(max_examples=300, deadline=None)
@given(open_angle, open_angle)
def test_round_trip(theta, phi):
    d = Direction(theta, phi)
    for frame in (IRS_FRAME, BS_FRAME):
        v = unit_vector(d, frame)
        assert np.linalg.norm(v) == pytest.approx(1.0, abs=1e-12)
        back = direction_from_vector(v, frame)
        assert back.theta == pytest.approx(theta, abs=1e-10)
        assert back.phi == pytest.approx(phi, abs=1e-10)


def test_steering_vector_examples():
    np.testing.assert_allclose(upa_steering_vector(Direction(0, 0), 12, 4, LAMBDA / 2, LAMBDA), np.ones(48))
    np.testing.assert_allclose(upa_steering_vector(Direction(0.3, -0.2), 1, 1, LAMBDA / 2, LAMBDA), [1.0])
    v = upa_steering_vector(Direction(math.pi / 4, 0.0), 2, 1, LAMBDA / 2, LAMBDA)
    np.testing.assert_allclose(v, [1.0, np.exp(1j * math.pi / math.sqrt(2))], atol=1e-14)


@settings(max_examples=50, deadline=None)
@given(open_angle, open_angle, st.integers(1, 8), st.integers(1, 8))
def test_steering_vector_norm(theta, phi, n1, n2):
    v = upa_steering_vector(Direction(theta, phi), n1, n2, LAMBDA / 2, LAMBDA)
    assert np.allclose(np.abs(v), 1.0)
    assert np.vdot(v, v).real == pytest.approx(n1 * n2, rel=1e-12)
