import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from scipy.linalg import expm

from mqcwit.dicke import (
    DickeState,
    evolve_pure,
    initial_state,
    mqc_direct_pure,
    prepare_all_up,
    prepare_css,
    prepare_ghz,
    qfi_pure,
    rotate_pure,
    spin_matrices,
)
from mqcwit.exact import dicke_to_full, mqc_direct_full, FullDensityMatrix
from mqcwit.params import X_AXIS, Y_AXIS, Z_AXIS, ModelParams, SpinAxis
from mqcwit.spectrum import css_spectrum_closed_form
from mqcwit.protocol import optimize_axis

axes = st.tuples(st.floats(-1, 1), st.floats(-1, 1), st.floats(-1, 1)).filter(
    lambda v: np.linalg.norm(v) > 0.1
).map(SpinAxis.normalized)


def random_dicke(N, seed):
    rng = np.random.default_rng(seed)
    a = rng.normal(size=N + 1) + 1j * rng.normal(size=N + 1)
    return DickeState(N, a / np.linalg.norm(a))


def mqc_by_eigenbasis(state, axis):
    """I_m from the eigenbasis of S_n built independently of the library."""
    sx, sy, sz = spin_matrices(state.N)
    n = axis.vector
    lam, V = np.linalg.eigh(n[0] * sx + n[1] * sy + n[2] * sz)
    p = np.abs(V.conj().T @ state.amps) ** 2
    M = np.rint(lam - lam.min()).astype(int)
    out = np.zeros(2 * state.N + 1)
    for i in range(len(p)):
        for j in range(len(p)):
            out[M[i] - M[j] + state.N] += p[i] * p[j]
    return out


def test_prepare_examples():
    assert np.allclose(prepare_all_up(2).amps, [1, 0, 0])
    assert np.allclose(prepare_all_up(1).amps, [1, 0])
    assert prepare_all_up(48).amps.shape == (49,)
    assert np.allclose(prepare_css(1, np.pi / 2, 0).amps, [1 / np.sqrt(2)] * 2)
    assert np.allclose(np.abs(prepare_css(2, 0.0, 0.0).amps), [0, 0, 1])
    assert np.allclose(prepare_css(2, np.pi / 2, 0).amps, [0.5, 1 / np.sqrt(2), 0.5])
    with pytest.raises(ValueError):
        prepare_all_up(0)
    with pytest.raises(ValueError):
        DickeState(2, [1.0, 1.0, 0.0])


def test_evolution_examples():
    psi = random_dicke(6, 1)
    assert np.allclose(evolve_pure(psi, ModelParams(6, 0.0), 3.7).amps, psi.amps)
    p = ModelParams(6, 1.3, 0.4)
    back = evolve_pure(evolve_pure(psi, p, 2.1), p, -2.1)
    assert back.fidelity(psi) == pytest.approx(1.0, abs=1e-10)
    with pytest.raises(ValueError):
        evolve_pure(psi, ModelParams(5, 1.0), 1.0)


@given(st.integers(1, 30), st.floats(-3, 3), st.floats(-2, 2), st.floats(-5, 5), st.integers(0, 10**6))
def test_unitarity_and_echo_identity(N, J, Omega, t, seed):
    psi = random_dicke(N, seed)
    p = ModelParams(N, J, Omega)
    fwd = evolve_pure(psi, p, t)
    assert np.vdot(fwd.amps, fwd.amps).real == pytest.approx(1.0, abs=1e-10)
    echo = evolve_pure(rotate_pure(fwd, Z_AXIS, 0.0), p, -t)
    assert echo.fidelity(psi) == pytest.approx(1.0, abs=1e-10)


def test_evolution_matches_dense_expm():
    p = ModelParams(5, 1.7, 0.6)
    sx, _, sz = spin_matrices(5)
    H = -(p.J / p.N) * sx @ sx - p.Omega * sz
    psi = random_dicke(5, 3)
    assert np.allclose(evolve_pure(psi, p, 1.3).amps, expm(-1j * H * 1.3) @ psi.amps, atol=1e-12)


def test_rotation_examples():
    psi = prepare_all_up(3)
    assert np.allclose(rotate_pure(psi, X_AXIS, 0.0).amps, psi.amps)
    assert np.allclose(np.abs(rotate_pure(psi, Z_AXIS, 1.1).amps), np.abs(psi.amps))
    flipped = rotate_pure(prepare_all_up(2), Y_AXIS, np.pi)
    assert np.allclose(np.abs(flipped.amps), [0, 0, 1], atol=1e-12)
    _, sy, _ = spin_matrices(2)
    assert np.allclose(flipped.amps, expm(-1j * np.pi * sy) @ [1, 0, 0], atol=1e-12)


def test_mqc_examples():
    s = mqc_direct_pure(prepare_all_up(5), Z_AXIS)
    assert s[0] == pytest.approx(1.0) and s.purity == pytest.approx(1.0)
    s = mqc_direct_pure(prepare_css(2, np.pi / 2, 0), Z_AXIS)
    assert np.allclose(s.values, [0.0625, 0.25, 0.375, 0.25, 0.0625], atol=1e-12)
    s = mqc_direct_pure(prepare_ghz(4), Z_AXIS)
    assert np.allclose(s.values, [0.25, 0, 0, 0, 0.5, 0, 0, 0, 0.25], atol=1e-12)


@given(st.integers(1, 12), axes, st.integers(0, 10**6))
def test_mqc_matches_eigenbasis_oracle(N, axis, seed):
    psi = random_dicke(N, seed)
    s = mqc_direct_pure(psi, axis)
    assert np.allclose(s.values, mqc_by_eigenbasis(psi, axis), atol=1e-12)
    assert np.allclose(s.values, s.values[::-1], atol=1e-10)
    assert s.values.min() >= -1e-12
    assert s.purity == pytest.approx(1.0, abs=1e-10)


@given(st.integers(1, 6), axes, st.integers(0, 10**6))
def test_mqc_matches_full_space(N, axis, seed):
    psi = random_dicke(N, seed)
    full = FullDensityMatrix.from_pure(N, dicke_to_full(psi))
    assert np.allclose(mqc_direct_pure(psi, axis).values, mqc_direct_full(full, axis).values, atol=1e-10)


@given(st.integers(1, 48), axes, st.integers(0, 10**6))
def test_fisher_equals_qfi_for_pure_states(N, axis, seed):
    psi = random_dicke(N, seed)
    assert mqc_direct_pure(psi, axis).f_i == pytest.approx(qfi_pure(psi, axis), abs=1e-8 * max(1, N * N))


@pytest.mark.parametrize("N", [1, 2, 7, 20, 48])
def test_css_spectrum_closed_form(N):
    s = mqc_direct_pure(prepare_css(N, np.pi / 2, 0), Z_AXIS)
    expected = [css_spectrum_closed_form(N, m) for m in range(-N, N + 1)]
    assert np.allclose(s.values, expected, atol=1e-10)


def test_qfi_examples():
    assert qfi_pure(prepare_all_up(6), Z_AXIS) == pytest.approx(0.0, abs=1e-12)
    for N in (1, 5, 30):
        assert qfi_pure(prepare_css(N, np.pi / 2, 0), Z_AXIS) == pytest.approx(N)
    assert qfi_pure(prepare_ghz(4), Z_AXIS) == pytest.approx(16.0)


def test_cat_time_optimal_qfi():
    N, J = 4, 1.0
    p = ModelParams(N, J)
    opt = optimize_axis(p, t=np.pi * N / (2 * J), quantity="qfi")
    assert opt.value == pytest.approx(N**2, rel=1e-9)


def test_initial_state_frames():
    assert np.allclose(initial_state(ModelParams(3, 1.0)).amps, prepare_all_up(3).amps)
    assert np.allclose(initial_state(ModelParams(3, 1.0, twist="z")).amps, prepare_css(3, np.pi / 2, 0).amps)
