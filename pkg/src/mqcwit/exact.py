"""Brute-force reference on the full 2^N Hilbert space.

Everything here is deliberately naive: explicit Kronecker products, dense
matrices, a general-purpose ODE integrator.  It exists to check the fast
engines at small N.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass
from functools import lru_cache
from math import comb, factorial

import numpy as np
import scipy.sparse as sp
from scipy.integrate import solve_ivp

from .dicke import DickeState
from .params import DecoherenceRates, ModelParams, SpinAxis
from .spectrum import MqcSpectrum

MAX_N = 12
MAX_N_LINDBLAD = 6

_ID = np.eye(2, dtype=complex)
_SZ = np.diag([1.0, -1.0]).astype(complex)
_SP = np.array([[0, 1], [0, 0]], dtype=complex)  # |up><down|
_SM = _SP.T.copy()
_SX = _SP + _SM
_SY = -1j * (_SP - _SM)
_PUP = np.diag([1.0, 0.0]).astype(complex)
_PDN = np.diag([0.0, 1.0]).astype(complex)


def _check_n(N, cap=MAX_N):
    if N < 1 or N > cap:
        raise ValueError(f"exact oracle supports 1 <= N <= {cap}, got N={N}")


@dataclass(frozen=True)
class FullDensityMatrix:
    N: int
    rho: np.ndarray

    def __post_init__(self):
        _check_n(self.N)
        r = np.asarray(self.rho, dtype=complex)
        d = 2**self.N
        if r.shape != (d, d):
            raise ValueError(f"expected a {d}x{d} matrix, got {r.shape}")
        if np.abs(r - r.conj().T).max() > 1e-10:
            raise ValueError("density matrix must be Hermitian within 1e-10")
        if abs(np.trace(r).real - 1.0) > 1e-10:
            raise ValueError("density matrix must have unit trace within 1e-10")
        r.setflags(write=False)
        object.__setattr__(self, "rho", r)

    @classmethod
    def from_pure(cls, N: int, psi) -> "FullDensityMatrix":
        psi = np.asarray(psi, dtype=complex)
        psi = psi / np.linalg.norm(psi)
        return cls(N, np.outer(psi, psi.conj()))

    def purity(self) -> float:
        return overlap(self, self)


def site_operator(N: int, op: np.ndarray, site: int) -> sp.csr_matrix:
    """``op`` acting on ``site`` (0 = leftmost Kronecker factor)."""
    return sp.kron(
        sp.kron(sp.identity(2**site, format="csr"), sp.csr_matrix(op)),
        sp.identity(2 ** (N - site - 1), format="csr"),
        format="csr",
    )


@lru_cache(maxsize=16)
def collective_spin(N: int):
    """Dense (Sx, Sy, Sz) on the full space."""
    _check_n(N)
    out = []
    for pauli in (_SX, _SY, _SZ):
        total = sum(site_operator(N, pauli, j) for j in range(N))
        out.append(0.5 * total.toarray())
    return tuple(out)


def collective_component(N: int, axis: SpinAxis) -> np.ndarray:
    sx, sy, sz = collective_spin(N)
    nx, ny, nz = axis.n
    return nx * sx + ny * sy + nz * sz


def hamiltonian_full(params: ModelParams) -> np.ndarray:
    sx, _, sz = collective_spin(params.N)
    twist, field = (sx, sz) if params.twist == "x" else (sz, sx)
    return -(params.J / params.N) * twist @ twist - params.Omega * field


def product_state(kets) -> np.ndarray:
    psi = np.array([1.0 + 0j])
    for k in kets:
        psi = np.kron(psi, np.asarray(k, dtype=complex))
    return psi


def dicke_to_full(state: DickeState) -> np.ndarray:
    """Embed a Dicke-manifold ket into the 2^N space."""
    N = state.N
    _check_n(N)
    psi = np.zeros(2**N, dtype=complex)
    # computational index bit = 1 means spin down at that site
    ndown = np.array([bin(i).count("1") for i in range(2**N)])
    for k in range(N + 1):
        psi[ndown == k] = state.amps[k] / np.sqrt(comb(N, k))
    return psi


def initial_full(params: ModelParams) -> FullDensityMatrix:
    if params.twist == "x":
        psi = product_state([[1, 0]] * params.N)
    else:
        psi = product_state([np.array([1, 1]) / np.sqrt(2)] * params.N)
    return FullDensityMatrix.from_pure(params.N, psi)


def _jump_operators(N: int, rates: DecoherenceRates):
    ops = []
    for rate, op in ((rates.gamma_ud, _SM), (rates.gamma_du, _SP), (rates.gamma_el, _PUP)):
        if rate > 0:
            ops += [np.sqrt(rate) * site_operator(N, op, j) for j in range(N)]
    return ops


def evolve_lindblad_full(
    rho: FullDensityMatrix,
    params: ModelParams,
    rates: DecoherenceRates,
    t: float,
    direction: str = "forward",
    rtol: float = 1e-10,
    atol: float = 1e-12,
) -> FullDensityMatrix:
    """Integrate the master equation for a time ``t >= 0``.

    ``direction="backward"`` flips the sign of the Hamiltonian only; the
    dissipators are unchanged.  Without dissipation the propagator is applied
    exactly instead of integrated.
    """
    if rho.N != params.N:
        raise ValueError("dimension mismatch between state and parameters")
    if t < 0:
        raise ValueError("t must be >= 0; use direction='backward' for time reversal")
    if direction not in ("forward", "backward"):
        raise ValueError(f"unknown direction {direction!r}")
    sign = 1.0 if direction == "forward" else -1.0
    H = sign * hamiltonian_full(params)
    N = rho.N
    if t == 0:
        return rho
    if not rates.any:
        vals, vecs = np.linalg.eigh(H)
        U = (vecs * np.exp(-1j * vals * t)) @ vecs.conj().T
        out = U @ rho.rho @ U.conj().T
        return FullDensityMatrix(N, 0.5 * (out + out.conj().T))

    _check_n(N, MAX_N_LINDBLAD)
    jumps = _jump_operators(N, rates)
    jumps_dag = [L.conj().T.tocsr() for L in jumps]
    decay = sum(Ld @ L for L, Ld in zip(jumps, jumps_dag))
    K = -1j * H - 0.5 * decay.toarray()  # rho' = K rho + rho K^dag + sum L rho L^dag
    K_dag = K.conj().T
    d = 2**N

    def rhs(_, y):
        r = y.reshape(d, d)
        out = K @ r + r @ K_dag
        for L, Ld in zip(jumps, jumps_dag):
            out += L @ (Ld.T @ r.T).T  # L r L^dag with sparse factors
        return out.ravel()

    sol = solve_ivp(rhs, (0.0, t), rho.rho.ravel().copy(), method="DOP853", rtol=rtol, atol=atol)
    if not sol.success:
        raise RuntimeError(f"Lindblad integration failed: {sol.message}")
    out = sol.y[:, -1].reshape(d, d)
    out = 0.5 * (out + out.conj().T)
    return FullDensityMatrix(N, out / np.trace(out).real)


def rotate_full(rho: FullDensityMatrix, axis: SpinAxis, phi: float) -> FullDensityMatrix:
    vals, vecs = np.linalg.eigh(collective_component(rho.N, axis))
    U = (vecs * np.exp(-1j * vals * phi)) @ vecs.conj().T
    out = U @ rho.rho @ U.conj().T
    return FullDensityMatrix(rho.N, 0.5 * (out + out.conj().T))


def overlap(rho1: FullDensityMatrix, rho2: FullDensityMatrix) -> float:
    """``tr(rho1 rho2)``."""
    if rho1.N != rho2.N:
        raise ValueError("dimension mismatch")
    return float(np.einsum("ij,ji->", rho1.rho, rho2.rho).real)


def mqc_direct_full(rho: FullDensityMatrix, axis: SpinAxis) -> MqcSpectrum:
    """Coherence intensities by grouping ``S_n`` eigenvalue differences."""
    N = rho.N
    vals, vecs = np.linalg.eigh(collective_component(N, axis))
    twice_m = np.rint(2 * vals).astype(int)
    if np.abs(2 * vals - twice_m).max() > 1e-9:
        raise RuntimeError("S_n eigenvalues are not half-integers within 1e-9")
    r = vecs.conj().T @ rho.rho @ vecs
    diff = (twice_m[:, None] - twice_m[None, :]) // 2
    weights = np.abs(r) ** 2
    values = np.bincount((diff + N).ravel(), weights=weights.ravel(), minlength=2 * N + 1)
    return MqcSpectrum(N, values, "direct")


def qfi_mixed_full(rho: FullDensityMatrix, axis: SpinAxis, cutoff: float = 1e-12) -> float:
    """Quantum Fisher information from the spectral decomposition of ``rho``."""
    lam, vecs = np.linalg.eigh(rho.rho)
    # integration noise can leave tiny negative eigenvalues
    lam = np.clip(lam, 0.0, None)
    lam = lam / lam.sum()
    A = vecs.conj().T @ collective_component(rho.N, axis) @ vecs
    lk, ll = lam[:, None], lam[None, :]
    denom = lk + ll
    mask = denom > cutoff
    terms = np.zeros_like(denom)
    terms[mask] = (lk - ll)[mask] ** 2 / denom[mask]
    return float(2.0 * np.sum(terms * np.abs(A) ** 2))


def f_i_full(rho: FullDensityMatrix, axis: SpinAxis) -> float:
    """``4 tr(rho^2 A^2 - (rho A)^2)``."""
    A = collective_component(rho.N, axis)
    r = rho.rho
    rA = r @ A
    return float(4.0 * (np.trace(r @ r @ A @ A) - np.trace(rA @ rA)).real)


def partial_trace_full(rho: FullDensityMatrix, n_traced: int) -> FullDensityMatrix:
    """Trace out the last ``n_traced`` sites."""
    N = rho.N
    if not 0 <= n_traced < N:
        raise ValueError("need 0 <= n_traced < N")
    keep = 2 ** (N - n_traced)
    r = rho.rho.reshape(keep, 2**n_traced, keep, 2**n_traced)
    return FullDensityMatrix(N - n_traced, np.einsum("ajbj->ab", r))


def von_neumann_entropy_full(rho: FullDensityMatrix) -> float:
    lam = np.linalg.eigvalsh(rho.rho)
    lam = lam[lam > 1e-14]
    return float(-np.sum(lam * np.log(lam)))


def echo_signal_full(
    rho0: FullDensityMatrix,
    params: ModelParams,
    rates: DecoherenceRates,
    t: float,
    axis: SpinAxis,
    phis,
) -> np.ndarray:
    """Forward evolve, rotate by each phi, evolve backward, overlap with rho0."""
    rho_t = evolve_lindblad_full(rho0, params, rates, t, "forward")
    out = []
    for phi in phis:
        rho_phi = rotate_full(rho_t, axis, phi)
        rho_f = evolve_lindblad_full(rho_phi, params, rates, t, "backward")
        out.append(overlap(rho0, rho_f))
    return np.array(out)


# --- explicit symmetrized operator basis ---------------------------------

_ZPM = {"1": _ID, "z": _SZ, "+": _SP, "-": _SM}
_XYZ = {"1": _ID, "x": _SX, "y": _SY, "z": _SZ}
_UDPM = {"u": _PUP, "d": _PDN, "+": _SP, "-": _SM}


def _kron_string(ops):
    out = np.array([[1.0 + 0j]])
    for o in ops:
        out = np.kron(out, o)
    return out


@lru_cache(maxsize=32)
def _symmetric_basis(N: int, alphabet: str):
    """All symmetrized strings over a 4-letter single-site alphabet.

    Returns a dict mapping the count tuple of letters 2..4 (e.g. (n_z, n_+, n_-)
    for "1z+-") to the sum of all distinct strings with those counts.
    """
    _check_n(N, 7)
    table = {"zpm": ("1", "z", "+", "-"), "xyz": ("1", "x", "y", "z"), "udpm": ("u", "d", "+", "-")}[
        alphabet
    ]
    mats = {"zpm": _ZPM, "xyz": _XYZ, "udpm": _UDPM}[alphabet]
    basis = {}
    for letters in itertools.product(table, repeat=N):
        counts = tuple(letters.count(c) for c in table)
        op = _kron_string([mats[c] for c in letters])
        basis[counts] = basis.get(counts, 0) + op
    return basis


def symmetric_basis_operator(N: int, n_z: int, n_plus: int, n_minus: int) -> np.ndarray:
    """The unit-weight symmetrized operator ``(n_z, n_+, n_-)``."""
    n1 = N - n_z - n_plus - n_minus
    return _symmetric_basis(N, "zpm")[(n1, n_z, n_plus, n_minus)]


def xyz_basis_operator(N: int, n_x: int, n_y: int, n_z: int) -> np.ndarray:
    n1 = N - n_x - n_y - n_z
    return _symmetric_basis(N, "xyz")[(n1, n_x, n_y, n_z)]


def updown_basis_operator(N: int, n_up: int, n_down: int, n_plus: int, n_minus: int) -> np.ndarray:
    """Unit-weight symmetrized operator over {|u><u|, |d><d|, sigma+, sigma-}."""
    return _symmetric_basis(N, "udpm")[(n_up, n_down, n_plus, n_minus)]


def symmetric_norm(N: int, n_z: int, n_plus: int, n_minus: int) -> int:
    """``tr[(n_z,n_+,n_-)(n_z,n_+,n_-)^dagger]``."""
    n1 = N - n_z - n_plus - n_minus
    return 2 ** (n1 + n_z) * factorial(N) // (
        factorial(n1) * factorial(n_z) * factorial(n_plus) * factorial(n_minus)
    )


def full_to_symmetric_coeffs(rho: FullDensityMatrix) -> dict:
    """Project onto the symmetric basis: ``c = tr(rho_alpha^dag rho) / norm``."""
    N = rho.N
    out = {}
    for (n1, nz, npl, nmi), op in _symmetric_basis(N, "zpm").items():
        out[(nz, npl, nmi)] = np.vdot(op, rho.rho) / symmetric_norm(N, nz, npl, nmi)
    return out


def symmetric_coeffs_to_full(N: int, coeffs: dict) -> np.ndarray:
    out = np.zeros((2**N, 2**N), dtype=complex)
    for (nz, npl, nmi), c in coeffs.items():
        if c != 0:
            out += c * symmetric_basis_operator(N, nz, npl, nmi)
    return out


def symmetrize(rho: FullDensityMatrix) -> FullDensityMatrix:
    """Average ``rho`` over all site permutations."""
    N = rho.N
    r = rho.rho.reshape([2] * (2 * N))
    acc = np.zeros_like(r)
    perms = list(itertools.permutations(range(N)))
    for p in perms:
        acc += r.transpose(list(p) + [N + q for q in p])
    return FullDensityMatrix(N, acc.reshape(2**N, 2**N) / len(perms))
