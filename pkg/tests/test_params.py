import numpy as np
import pytest
from hypothesis import example, given
from hypothesis import strategies as st

from mqcwit.params import DecoherenceRates, ModelParams, SpinAxis


def test_model_params_validation():
    assert ModelParams(4, 1.0).Omega == 0.0
    for bad in (0, -1, 2.5, True):
        with pytest.raises(ValueError):
            ModelParams(bad, 1.0)
    with pytest.raises(ValueError):
        ModelParams(4, float("nan"))
    with pytest.raises(ValueError):
        ModelParams(4, 1.0, float("inf"))
    with pytest.raises(ValueError):
        ModelParams(4, 1.0, twist="y")


def test_rates_validation_and_total():
    r = DecoherenceRates(1.0, 1.0, 10.0)
    assert r.total == 6.0 and r.any
    assert not DecoherenceRates().any
    with pytest.raises(ValueError):
        DecoherenceRates(-1.0)
    split = DecoherenceRates.from_total(60.0)
    assert split.gamma_ud == split.gamma_du == 10.0 and split.gamma_el == 100.0
    assert split.total == pytest.approx(60.0)


def test_axis_unit_norm():
    with pytest.raises(ValueError):
        SpinAxis((1.0, 1.0, 0.0))
    with pytest.raises(ValueError):
        SpinAxis((1.0, 0.0))
    a = SpinAxis.normalized((1.0, 1.0, 0.0))
    assert np.linalg.norm(a.vector) == pytest.approx(1.0, abs=1e-15)


@given(st.floats(0, np.pi), st.floats(-np.pi + 1e-6, np.pi))
@example(1e-7, 0.0)
def test_axis_angles_round_trip(theta, phi):
    a = SpinAxis.from_angles(theta, phi)
    b = SpinAxis.from_angles(*a.angles)
    assert np.allclose(a.vector, b.vector, atol=1e-12)


def test_twist_frame_map_is_proper_involution():
    R = np.array([SpinAxis(tuple(e)).to_twist_frame("z").vector for e in np.eye(3)]).T
    assert np.linalg.det(R) == pytest.approx(1.0)
    v = SpinAxis.normalized((0.3, -0.2, 0.9))
    assert np.allclose(v.to_twist_frame("z").to_twist_frame("z").vector, v.vector)
    assert v.to_twist_frame("x") == v
