"""Pure states on the symmetric Dicke manifold.

Amplitudes are indexed by ``k = 0..N`` with ``M = N/2 - k``, i.e. by the
number of flipped spins, descending in ``M``.  The same convention is used
for every (2J+1)-dimensional spin block in :mod:`mqcwit.blocks`.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache

import numpy as np
from scipy.special import gammaln

from .params import ModelParams, SpinAxis, Z_AXIS
from .spectrum import MqcSpectrum


@lru_cache(maxsize=256)
def spin_matrices(two_j: int):
    """Spin-J matrices (Sx, Sy, Sz) in the ``|J, J - k>`` basis.

    Returned arrays are read-only.
    """
    M = two_j / 2.0 - np.arange(two_j + 1)
    J = two_j / 2.0
    # <M+1|S+|M> sits at (k-1, k)
    sp = np.diag(np.sqrt(J * (J + 1) - M[1:] * (M[1:] + 1)), 1).astype(complex)
    sx = 0.5 * (sp + sp.T)
    sy = -0.5j * (sp - sp.T)
    sz = np.diag(M).astype(complex)
    for a in (sx, sy, sz):
        a.setflags(write=False)
    return sx, sy, sz


def spin_component(two_j: int, axis: SpinAxis) -> np.ndarray:
    sx, sy, sz = spin_matrices(two_j)
    nx, ny, nz = axis.n
    return nx * sx + ny * sy + nz * sz


@lru_cache(maxsize=256)
def _axis_eig(two_j: int, axis: SpinAxis):
    vals, vecs = np.linalg.eigh(spin_component(two_j, axis))
    return vals, vecs


@dataclass(frozen=True)
class DickeState:
    N: int
    amps: np.ndarray

    def __post_init__(self):
        a = np.asarray(self.amps, dtype=complex)
        if a.shape != (self.N + 1,):
            raise ValueError(f"expected {self.N + 1} amplitudes, got shape {a.shape}")
        if abs(np.vdot(a, a).real - 1.0) > 1e-10:
            raise ValueError("Dicke state must have unit norm within 1e-10")
        a.setflags(write=False)
        object.__setattr__(self, "amps", a)

    def fidelity(self, other: "DickeState") -> float:
        return float(abs(np.vdot(self.amps, other.amps)) ** 2)


def _check_n(N):
    if isinstance(N, bool) or not isinstance(N, (int, np.integer)) or N < 1:
        raise ValueError(f"N must be a positive integer, got {N!r}")


def prepare_all_up(N: int) -> DickeState:
    _check_n(N)
    amps = np.zeros(N + 1, dtype=complex)
    amps[0] = 1.0
    return DickeState(N, amps)


def prepare_css(N: int, theta: float, varphi: float) -> DickeState:
    """Coherent state ``(sin(theta/2)|up> + e^{i varphi} cos(theta/2)|down>)^N``."""
    _check_n(N)
    k = np.arange(N + 1)
    s, c = np.sin(theta / 2), np.cos(theta / 2)
    log_binom = gammaln(N + 1) - gammaln(k + 1) - gammaln(N - k + 1)
    # powers of zero are handled exactly; 0**0 == 1
    amps = np.exp(0.5 * log_binom) * s ** (N - k) * c**k * np.exp(1j * k * varphi)
    amps = amps / np.linalg.norm(amps)
    return DickeState(N, amps)


def prepare_ghz(N: int, axis: SpinAxis = Z_AXIS) -> DickeState:
    """``(|all up> + |all down>)/sqrt(2)`` along ``axis``."""
    _check_n(N)
    vals, vecs = _axis_eig(N, axis)
    amps = (vecs[:, -1] + vecs[:, 0]) / np.sqrt(2)
    return DickeState(N, amps)


def initial_state(params: ModelParams) -> DickeState:
    """Fiducial state for the twist frame: all up along z (x-twist) or +x (z-twist)."""
    if params.twist == "x":
        return prepare_all_up(params.N)
    return prepare_css(params.N, np.pi / 2, 0.0)


def hamiltonian(params: ModelParams) -> np.ndarray:
    sx, _, sz = spin_matrices(params.N)
    if params.twist == "x":
        twist, field = sx, sz
    else:
        twist, field = sz, sx
    return -(params.J / params.N) * (twist @ twist) - params.Omega * field


@lru_cache(maxsize=64)
def _hamiltonian_eig(params: ModelParams):
    return np.linalg.eigh(hamiltonian(params))


def evolve_pure(state: DickeState, params: ModelParams, t: float) -> DickeState:
    """``exp(-i H t)|psi>``; negative ``t`` runs the dynamics backward."""
    if state.N != params.N:
        raise ValueError(f"state has N={state.N} but params have N={params.N}")
    if not np.isfinite(t):
        raise ValueError("t must be finite")
    vals, vecs = _hamiltonian_eig(params)
    amps = vecs @ (np.exp(-1j * vals * t) * (vecs.conj().T @ state.amps))
    return DickeState(state.N, amps)


def rotate_pure(state: DickeState, axis: SpinAxis, phi: float) -> DickeState:
    """Apply ``exp(-i S_n phi)``."""
    vals, vecs = _axis_eig(state.N, axis)
    amps = vecs @ (np.exp(-1j * vals * phi) * (vecs.conj().T @ state.amps))
    return DickeState(state.N, amps)


def axis_populations(state: DickeState, axis: SpinAxis) -> np.ndarray:
    """Probabilities of ``S_n = M`` ordered by ascending ``M``."""
    _, vecs = _axis_eig(state.N, axis)
    return np.abs(vecs.conj().T @ state.amps) ** 2


def mqc_direct_pure(state: DickeState, axis: SpinAxis) -> MqcSpectrum:
    """MQC intensities of ``|psi><psi|`` with respect to ``S_n``.

    On the Dicke manifold every ``S_n`` eigenvalue is non-degenerate, so the
    order-m block of the density matrix is ``b_M b*_{M+m}`` and its squared
    norm is an autocorrelation of the populations ``|b_M|^2``.
    """
    p = axis_populations(state, axis)
    N = state.N
    full = np.correlate(p, p, mode="full")  # lag -N..N
    return MqcSpectrum(N, np.clip(full, 0.0, None), "direct")


def spin_expectations(state: DickeState):
    """Mean spin vector and the symmetrized second-moment matrix."""
    ops = spin_matrices(state.N)
    a = state.amps
    vecs = [op @ a for op in ops]
    mean = np.array([np.vdot(a, v).real for v in vecs])
    second = np.array([[np.vdot(u, v).real for v in vecs] for u in vecs])
    second = 0.5 * (second + second.T)
    return mean, second


def covariance_matrix(state: DickeState) -> np.ndarray:
    mean, second = spin_expectations(state)
    return second - np.outer(mean, mean)


def qfi_pure(state: DickeState, axis: SpinAxis) -> float:
    """``4 Var(S_n)``, the quantum Fisher information of a pure state."""
    A = spin_component(state.N, axis)
    v = A @ state.amps
    mean = np.vdot(state.amps, v).real
    second = np.vdot(v, v).real
    return float(max(4.0 * (second - mean**2), 0.0))
