"""Permutation-symmetric density matrices in the (n_z, n_+, n_-) operator basis.

A symmetric state of N spin-1/2 particles is ``rho = sum_alpha c_alpha rho_alpha``
where ``rho_alpha`` is the sum of all *distinct* tensor strings containing
``n_z`` factors sigma_z, ``n_+`` sigma_+, ``n_-`` sigma_- and identities
elsewhere (unit-weight symmetrization).  The basis is orthogonal with

    tr(rho_alpha rho_alpha^dag) = 2^(n_1 + n_z) N! / (n_1! n_z! n_+! n_-!).

Public coefficients follow this unit-weight convention.  Internally every
operation works on *normalized* coefficients ``c * sqrt(norm)``, in which the
unitary parts of the dynamics are orthogonal/unitary matrices; this keeps the
arithmetic well conditioned for N ~ 50 where the norms span ~40 decades.

Flat vectors are ordered lexicographically in (n_+, n_-, n_z).
"""

from __future__ import annotations

from collections import OrderedDict
from dataclasses import dataclass
from functools import lru_cache
from math import comb, factorial, lgamma, log

import numpy as np
from scipy.linalg import expm

from .params import DecoherenceRates, SpinAxis
from .spectrum import MqcSpectrum

LN2 = log(2.0)


# --- layout -----------------------------------------------------------------


def sym_dimension(N: int) -> int:
    return comb(N + 3, 3)


@dataclass(frozen=True)
class _Layout:
    N: int
    n_plus: np.ndarray
    n_minus: np.ndarray
    n_z: np.ndarray
    cube_index: np.ndarray  # flat index into a (N+1)^3 cube [n_z, n_+, n_-]
    log_norm: np.ndarray
    offsets: dict  # (n_+, n_-) -> start of that block in the flat vector


@lru_cache(maxsize=32)
def layout(N: int) -> _Layout:
    p, m, z = [], [], []
    offsets = {}
    for npl in range(N + 1):
        for nmi in range(N + 1 - npl):
            offsets[(npl, nmi)] = len(z)
            for nz in range(N + 1 - npl - nmi):
                p.append(npl)
                m.append(nmi)
                z.append(nz)
    p, m, z = (np.array(a, dtype=int) for a in (p, m, z))
    n1 = N - p - m - z
    lg = np.vectorize(lambda k: lgamma(k + 1))
    log_norm = (n1 + z) * LN2 + lgamma(N + 1) - lg(n1) - lg(z) - lg(p) - lg(m)
    cube_index = (z * (N + 1) + p) * (N + 1) + m
    for a in (p, m, z, cube_index, log_norm):
        a.setflags(write=False)
    return _Layout(N, p, m, z, cube_index, log_norm, offsets)


def _to_cube(N, flat):
    cube = np.zeros((N + 1) ** 3, dtype=complex)
    cube[layout(N).cube_index] = flat
    return cube.reshape(N + 1, N + 1, N + 1)


def _from_cube(N, cube):
    return cube.reshape(-1)[layout(N).cube_index]


# --- state ------------------------------------------------------------------


class SymmetricState:
    """Immutable permutation-symmetric density matrix."""

    __slots__ = ("N", "_cube")

    def __init__(self, N: int, coeffs, *, check: bool = True):
        lay = layout(N)
        c = np.asarray(coeffs, dtype=complex)
        if c.shape != (sym_dimension(N),):
            raise ValueError(f"expected {sym_dimension(N)} coefficients, got {c.shape}")
        self.N = N
        self._cube = _to_cube(N, c * np.exp(0.5 * lay.log_norm))
        self._cube.setflags(write=False)
        if check:
            self.validate()

    @classmethod
    def _from_normalized_cube(cls, N, cube, check=False):
        obj = cls.__new__(cls)
        obj.N = N
        obj._cube = cube
        cube.setflags(write=False)
        if check:
            obj.validate()
        return obj

    @property
    def coeffs(self) -> np.ndarray:
        """Unit-weight coefficients ``c_alpha`` in flat layout."""
        lay = layout(self.N)
        return _from_cube(self.N, self._cube) * np.exp(-0.5 * lay.log_norm)

    @property
    def normalized(self) -> np.ndarray:
        """Coefficients in the orthonormal version of the basis (flat layout)."""
        return _from_cube(self.N, self._cube)

    def coeff(self, n_z: int, n_plus: int, n_minus: int) -> complex:
        N = self.N
        if min(n_z, n_plus, n_minus) < 0 or n_z + n_plus + n_minus > N:
            raise IndexError((n_z, n_plus, n_minus))
        c = self._cube[n_z, n_plus, n_minus]
        return complex(c * np.exp(-0.5 * _log_norm(N, n_z, n_plus, n_minus)))

    def trace(self) -> float:
        return float((2**self.N * self.coeff(0, 0, 0)).real)

    def purity(self) -> float:
        return float(np.sum(np.abs(self._cube) ** 2))

    def hermiticity_error(self) -> float:
        return float(np.abs(self._cube - self._cube.transpose(0, 2, 1).conj()).max())

    def validate(self, tol: float = 1e-9):
        if abs(self.trace() - 1.0) > tol:
            raise ValueError(f"trace {self.trace()!r} differs from 1 by more than {tol}")
        if self.hermiticity_error() > tol:
            raise ValueError("coefficients violate c(n_z,n_+,n_-) = conj c(n_z,n_-,n_+)")

    def __repr__(self):
        return f"SymmetricState(N={self.N}, purity={self.purity():.6g})"


def _log_norm(N, n_z, n_plus, n_minus):
    n1 = N - n_z - n_plus - n_minus
    return (
        (n1 + n_z) * LN2
        + lgamma(N + 1)
        - lgamma(n1 + 1)
        - lgamma(n_z + 1)
        - lgamma(n_plus + 1)
        - lgamma(n_minus + 1)
    )


def initial_all_up_sym(N: int) -> SymmetricState:
    """``|up...up><up...up| = sum_{n_z} 2^-N (n_z, 0, 0)``."""
    if N < 1:
        raise ValueError("N must be >= 1")
    lay = layout(N)
    c = np.where((lay.n_plus == 0) & (lay.n_minus == 0), 2.0**-N, 0.0)
    return SymmetricState(N, c)


def maximally_mixed_sym(N: int) -> SymmetricState:
    lay = layout(N)
    c = np.zeros(sym_dimension(N))
    c[(lay.n_plus == 0) & (lay.n_minus == 0) & (lay.n_z == 0)] = 2.0**-N
    return SymmetricState(N, c)


def overlap_sym(a: SymmetricState, b: SymmetricState) -> float:
    """``tr(a b)``."""
    if a.N != b.N:
        raise ValueError("particle numbers differ")
    return float(np.sum(a._cube * b._cube.transpose(0, 2, 1)).real)


# --- basis changes ----------------------------------------------------------


def _ipow(e):
    return (1, 1j, -1, -1j)[e % 4]


@lru_cache(maxsize=None)
def zpm_to_xyz_coefficient(n_plus: int, n_minus: int, n_x: int) -> complex:
    """Expansion coefficient of (n_x, n_y) in the symmetrized (n_+, n_-) string.

    Exact rational arithmetic; ``n_y = n_+ + n_- - n_x``.
    """
    s = n_plus + n_minus
    n_y = s - n_x
    total = 0
    for k in range(max(0, n_x - n_minus), min(n_x, n_plus) + 1):
        total += comb(n_plus, k) * comb(n_minus, n_x - k) * _ipow((n_plus - k) + 3 * (n_minus - (n_x - k)))
    return complex(total) * (_fact(n_x) * _fact(n_y) / (_fact(n_plus) * _fact(n_minus) * 2**s))


@lru_cache(maxsize=None)
def xyz_to_zpm_coefficient(n_x: int, n_y: int, n_plus: int) -> complex:
    """Expansion coefficient of (n_+, n_-) in the symmetrized (n_x, n_y) string."""
    s = n_x + n_y
    n_minus = s - n_plus
    total = 0
    for k in range(max(0, n_plus - n_y), min(n_x, n_plus) + 1):
        total += comb(n_x, k) * comb(n_y, n_plus - k) * _ipow(3 * (n_plus - k) + (n_y - (n_plus - k)))
    return complex(total) * (_fact(n_plus) * _fact(n_minus) / (_fact(n_x) * _fact(n_y)))


@lru_cache(maxsize=None)
def _fact(n):
    return factorial(n)


def _gauss_int_sum(terms):
    re = sum(c for c, e in terms if e % 4 == 0) - sum(c for c, e in terms if e % 4 == 2)
    im = sum(c for c, e in terms if e % 4 == 1) - sum(c for c, e in terms if e % 4 == 3)
    return re, im


@lru_cache(maxsize=None)
def _zpm_to_xyz_normalized(s: int) -> np.ndarray:
    """Unitary (s+1)x(s+1) map from normalized (n_+) to normalized (n_x) coefficients."""
    T = np.zeros((s + 1, s + 1), dtype=complex)
    for n_plus in range(s + 1):
        n_minus = s - n_plus
        for n_x in range(s + 1):
            n_y = s - n_x
            terms = [
                (comb(n_plus, k) * comb(n_minus, n_x - k), (n_plus - k) + 3 * (n_minus - (n_x - k)))
                for k in range(max(0, n_x - n_minus), min(n_x, n_plus) + 1)
            ]
            re, im = _gauss_int_sum(terms)
            scale = np.exp(
                0.5 * (lgamma(n_x + 1) + lgamma(n_y + 1) - lgamma(n_plus + 1) - lgamma(n_minus + 1))
                - 0.5 * s * LN2
            )
            T[n_x, n_plus] = complex(re, im) * scale
    T.setflags(write=False)
    return T


@lru_cache(maxsize=None)
def _xyz_to_zpm_normalized(s: int) -> np.ndarray:
    T = np.zeros((s + 1, s + 1), dtype=complex)
    for n_x in range(s + 1):
        n_y = s - n_x
        for n_plus in range(s + 1):
            n_minus = s - n_plus
            terms = [
                (comb(n_x, k) * comb(n_y, n_plus - k), 3 * (n_plus - k) + (n_y - (n_plus - k)))
                for k in range(max(0, n_plus - n_y), min(n_x, n_plus) + 1)
            ]
            re, im = _gauss_int_sum(terms)
            scale = np.exp(
                0.5 * (lgamma(n_plus + 1) + lgamma(n_minus + 1) - lgamma(n_x + 1) - lgamma(n_y + 1))
                - 0.5 * s * LN2
            )
            T[n_plus, n_x] = complex(re, im) * scale
    T.setflags(write=False)
    return T


def _cube_zpm_to_xyz(N, Z):
    X = np.zeros_like(Z)
    for s in range(N + 1):
        p = np.arange(s + 1)
        block = Z[:, p, s - p]  # (n_z, n_+)
        X[p, s - p, :] = _zpm_to_xyz_normalized(s) @ block.T  # rows n_x
    return X


def _cube_xyz_to_zpm(N, X):
    Z = np.zeros_like(X)
    for s in range(N + 1):
        a = np.arange(s + 1)
        block = X[a, s - a, :]  # (n_x, n_z)
        Z[:, a, s - a] = (_xyz_to_zpm_normalized(s) @ block).T
    return Z


@lru_cache(maxsize=32)
def _xyz_layout(N):
    x, y, z = [], [], []
    for nx in range(N + 1):
        for ny in range(N + 1 - nx):
            for nz in range(N + 1 - nx - ny):
                x.append(nx)
                y.append(ny)
                z.append(nz)
    x, y, z = (np.array(a) for a in (x, y, z))
    n1 = N - x - y - z
    lg = np.vectorize(lambda k: lgamma(k + 1))
    log_norm = N * LN2 + lgamma(N + 1) - lg(n1) - lg(x) - lg(y) - lg(z)
    return x, y, z, (x * (N + 1) + y) * (N + 1) + z, log_norm


def xyz_indices(N: int):
    """(n_x, n_y, n_z) arrays giving the order of :func:`basis_zpm_xyz` output."""
    x, y, z, _, _ = _xyz_layout(N)
    return x, y, z


def basis_zpm_xyz(state_or_coeffs, direction: str = "to_xyz", N: int | None = None) -> np.ndarray:
    """Change between the (z,+,-) and (x,y,z) symmetrized bases.

    ``to_xyz`` takes a :class:`SymmetricState` and returns unit-weight
    coefficients over the (x,y,z) basis, ordered as :func:`xyz_indices`.
    ``to_zpm`` takes such a vector (and ``N``) and returns (z,+,-)
    coefficients in the flat state layout.
    """
    if direction == "to_xyz":
        st = state_or_coeffs
        N = st.N
        X = _cube_zpm_to_xyz(N, st._cube)
        _, _, _, idx, log_norm = _xyz_layout(N)
        return X.reshape(-1)[idx] * np.exp(-0.5 * log_norm)
    if direction == "to_zpm":
        if N is None:
            raise ValueError("N is required for direction='to_zpm'")
        _, _, _, idx, log_norm = _xyz_layout(N)
        X = np.zeros((N + 1) ** 3, dtype=complex)
        X[idx] = np.asarray(state_or_coeffs) * np.exp(0.5 * log_norm)
        Z = _cube_xyz_to_zpm(N, X.reshape(N + 1, N + 1, N + 1))
        return _from_cube(N, Z) * np.exp(-0.5 * layout(N).log_norm)
    raise ValueError(f"unknown direction {direction!r}")


# --- rotations --------------------------------------------------------------


def y_rotation_coefficient(n_x: int, n_z: int, n_x_new: int, phi: float) -> float:
    """Closed-form coefficient of (n_x', n_z') in exp(-i S_y phi)(n_x, n_y, n_z)exp(i S_y phi).

    Loses precision for large ``n_x + n_z``; used as a cross-check of
    :func:`_y_rotation_normalized`.
    """
    n_z_new = n_x + n_z - n_x_new
    c, s = np.cos(phi), np.sin(phi)
    total = 0.0
    for k in range(max(0, n_x_new - n_z), min(n_x_new, n_x) + 1):
        total += (
            comb(n_x, k)
            * comb(n_z, n_x_new - k)
            * c ** (n_z - n_x_new + 2 * k)
            * s ** (n_x + n_x_new - 2 * k)
            * (-1) ** (n_x - k)
        )
    return total * _fact(n_x_new) * _fact(n_z_new) / (_fact(n_x) * _fact(n_z))


@lru_cache(maxsize=None)
def _y_generator_eig(q: int):
    a = np.arange(q + 1)
    off = np.sqrt((a[1:]) * (q - a[1:] + 1.0))  # G[a, a-1]
    G = np.diag(off, -1) - np.diag(off, 1)  # real antisymmetric
    vals, vecs = np.linalg.eigh(1j * G)
    return vals, vecs


def _y_rotation_normalized(q: int, phi: float) -> np.ndarray:
    """Orthogonal map on normalized (n_x) coefficients at fixed n_x + n_z = q."""
    vals, vecs = _y_generator_eig(q)
    # exp(phi G) with G = -i (iG)
    R = (vecs * np.exp(-1j * phi * vals)) @ vecs.conj().T
    return R.real


def _cube_rotate_y(N, X, phi):
    out = np.zeros_like(X)
    for q in range(N + 1):
        a = np.arange(q + 1)
        block = X[a, :, q - a]  # (n_x, n_y)
        out[a, :, q - a] = _y_rotation_normalized(q, phi) @ block
    return out


@lru_cache(maxsize=32)
def _order_grid(N):
    p = np.arange(N + 1)
    return (p[:, None] - p[None, :])[None, :, :]  # m = n_+ - n_- on the cube


def _cube_rotate_z(N, Z, phi):
    return Z * np.exp(-1j * phi * _order_grid(N))


def _cube_rotate_y_zpm(N, Z, phi):
    if phi == 0:
        return Z
    return _cube_xyz_to_zpm(N, _cube_rotate_y(N, _cube_zpm_to_xyz(N, Z), phi))


def _axis_euler(axis: SpinAxis):
    theta, az = axis.angles
    if theta == 0.0:
        az = 0.0
    return theta, az


def _cube_align(N, Z, axis, inverse=False):
    """``V^dag rho V`` (inverse=False) or ``V rho V^dag`` with ``V S_z V^dag = S_n``."""
    theta, az = _axis_euler(axis)
    if not inverse:
        Z = _cube_rotate_z(N, Z, -az)
        return _cube_rotate_y_zpm(N, Z, -theta)
    Z = _cube_rotate_y_zpm(N, Z, theta)
    return _cube_rotate_z(N, Z, az)


def rotate_sym(state: SymmetricState, axis: SpinAxis, phi: float) -> SymmetricState:
    """``exp(-i S_n phi) rho exp(i S_n phi)``."""
    N = state.N
    if phi == 0:
        return state
    Z = _cube_align(N, state._cube, axis)
    Z = _cube_rotate_z(N, Z, phi)
    Z = _cube_align(N, Z, axis, inverse=True)
    return SymmetricState._from_normalized_cube(N, Z)


def align_to_z(state: SymmetricState, axis: SpinAxis) -> SymmetricState:
    """Rotate the state so that ``axis`` is carried onto +z."""
    return SymmetricState._from_normalized_cube(state.N, _cube_align(state.N, state._cube, axis))


def coherent_state_sym(N: int, axis: SpinAxis) -> SymmetricState:
    """All spins pointing along ``axis``."""
    return SymmetricState._from_normalized_cube(
        N, _cube_align(N, initial_all_up_sym(N)._cube, axis, inverse=True)
    )


def initial_sym(params) -> SymmetricState:
    """Fiducial state of the z-twist frame: spins along +x."""
    if params.twist != "z":
        raise ValueError("the symmetric engine simulates the z-twist frame only (twist='z')")
    return coherent_state_sym(params.N, SpinAxis((1.0, 0.0, 0.0)))


# --- Liouvillian ------------------------------------------------------------


class BlockLiouvillian:
    """Generator of ``dc/dt`` split into (n_+, n_-) blocks.

    Each block is stored as tridiagonal bands ``(sub, diag, sup)`` over
    ``n_z = 0..N-n_+-n_-`` in the unit-weight convention:
    ``dc[k]/dt = sub[k] c[k-1] + diag[k] c[k] + sup[k] c[k+1]`` (``sub[0]`` and
    ``sup[-1]`` are unused and zero).  The Hamiltonian and dissipative parts
    are kept apart so that time reversal flips only the former.
    """

    def __init__(self, N: int, hamiltonian: dict | None = None, dissipator: dict | None = None):
        self.N = N
        self.hamiltonian = hamiltonian or {}
        self.dissipator = dissipator or {}
        self._cache = OrderedDict()

    def __add__(self, other: "BlockLiouvillian") -> "BlockLiouvillian":
        if other.N != self.N:
            raise ValueError("particle numbers differ")
        return BlockLiouvillian(
            self.N, _add_bands(self.hamiltonian, other.hamiltonian), _add_bands(self.dissipator, other.dissipator)
        )

    def block(self, n_plus: int, n_minus: int, direction: str = "forward") -> np.ndarray:
        """Dense generator block in the unit-weight convention."""
        q = self.N - n_plus - n_minus
        out = np.zeros((q + 1, q + 1), dtype=complex)
        sign = 1.0 if direction == "forward" else -1.0
        for bands, fac in ((self.hamiltonian, sign), (self.dissipator, 1.0)):
            if (n_plus, n_minus) in bands:
                sub, diag, sup = bands[(n_plus, n_minus)]
                out += fac * (np.diag(sub[1:], -1) + np.diag(diag) + np.diag(sup[:-1], 1))
        return out

    def propagator(self, t: float, direction: str = "forward"):
        """Per-``s`` stacks of normalized block propagators ``exp(G t)``."""
        key = (float(t), direction)
        if key in self._cache:
            self._cache.move_to_end(key)
            return self._cache[key]
        N = self.N
        props = []
        for s in range(N + 1):
            q = N - s
            k = np.arange(q + 1)
            # D = sqrt(binom(q, k)); similarity G -> D G D^-1
            up_ratio = np.sqrt((k[1:]) / (q - k[1:] + 1.0))  # D[k-1]/D[k]
            gens = np.zeros((s + 1, q + 1, q + 1), dtype=complex)
            for n_plus in range(s + 1):
                G = self.block(n_plus, s - n_plus, direction)
                if q > 0:
                    i = np.arange(1, q + 1)
                    G[i, i - 1] /= up_ratio  # * D[k]/D[k-1]
                    G[i - 1, i] *= up_ratio  # * D[k-1]/D[k]
                gens[n_plus] = G
            props.append(expm(gens * t) if t != 0 else np.broadcast_to(np.eye(q + 1), gens.shape))
        self._cache[key] = props
        while len(self._cache) > 8:
            self._cache.popitem(last=False)
        return props


def _add_bands(a, b):
    out = dict(a)
    for key, bands in b.items():
        if key in out:
            out[key] = tuple(x + y for x, y in zip(out[key], bands))
        else:
            out[key] = bands
    return out


def build_interaction_blocks(N: int, J: float) -> BlockLiouvillian:
    """Blocks of ``-i[H, .]`` for ``H = -(J/N) S_z^2`` (constant dropped).

    ``S_z^2 = N/4 + (1/2) sum_{k<j} s_z^k s_z^j``; blocks with ``n_+ = n_-``
    vanish.
    """
    scale = -J / (2.0 * N)
    bands = {}
    for n_plus in range(N + 1):
        for n_minus in range(N + 1 - n_plus):
            m = n_plus - n_minus
            if m == 0:
                continue
            q = N - n_plus - n_minus
            k = np.arange(q + 1)
            n1 = q - k
            # transpose of -2i m [(n_z+1)(n_z+1) + (n_1+1)(n_z-1)]
            sub = scale * (-2j * m) * k
            sup = scale * (-2j * m) * n1
            sub = sub.astype(complex)
            sup = sup.astype(complex)
            sub[0] = 0.0
            sup[-1] = 0.0
            bands[(n_plus, n_minus)] = (sub, np.zeros(q + 1, dtype=complex), sup)
    return BlockLiouvillian(N, hamiltonian=bands)


def build_dissipator(N: int, rates: DecoherenceRates) -> BlockLiouvillian:
    """Raman flips and elastic dephasing acting identically on every spin."""
    g_ud, g_du, g_el = rates.gamma_ud, rates.gamma_du, rates.gamma_el
    bands = {}
    if not rates.any:
        return BlockLiouvillian(N)
    for n_plus in range(N + 1):
        for n_minus in range(N + 1 - n_plus):
            s = n_plus + n_minus
            q = N - s
            k = np.arange(q + 1, dtype=float)
            diag = -(g_ud + g_du) * (k + s / 2.0) - g_el * s / 2.0
            sub = (g_du - g_ud) * k
            sub[0] = 0.0
            bands[(n_plus, n_minus)] = (
                sub.astype(complex),
                diag.astype(complex),
                np.zeros(q + 1, dtype=complex),
            )
    return BlockLiouvillian(N, dissipator=bands)


def build_generator(params, rates: DecoherenceRates) -> BlockLiouvillian:
    """Full one-axis-twisting Liouvillian for ``params`` in the z-twist frame."""
    if params.twist != "z":
        raise ValueError("the symmetric engine simulates the z-twist frame only (twist='z')")
    if params.Omega != 0:
        raise ValueError(
            "a transverse field breaks the (n_+, n_-) block structure; "
            "use the Dicke engine (no decoherence) or the exact oracle (N <= 6)"
        )
    return build_interaction_blocks(params.N, params.J) + build_dissipator(params.N, rates)


def evolve_sym(state: SymmetricState, gen: BlockLiouvillian, t: float, direction: str = "forward") -> SymmetricState:
    """Apply ``exp(L t)`` block by block; ``backward`` negates only the Hamiltonian."""
    if state.N != gen.N:
        raise ValueError("particle numbers differ")
    if t < 0:
        raise ValueError("t must be >= 0; use direction='backward' for time reversal")
    if direction not in ("forward", "backward"):
        raise ValueError(f"unknown direction {direction!r}")
    if t == 0:
        return state
    N = state.N
    props = gen.propagator(t, direction)
    Z = state._cube
    out = np.zeros_like(Z)
    for s in range(N + 1):
        q = N - s
        p = np.arange(s + 1)
        vecs = Z[: q + 1, p, s - p].T  # (block, n_z)
        out[: q + 1, p, s - p] = np.einsum("bij,bj->bi", props[s], vecs).T
    return SymmetricState._from_normalized_cube(N, out)


# --- observables ------------------------------------------------------------


@dataclass(frozen=True)
class SymObservables:
    Sx: float
    Sy: float
    Sz: float
    P0: float
    Pn: np.ndarray  # probability of n flipped (down) spins, n = 0..N
    Sz2: float


@lru_cache(maxsize=32)
def _flip_kernel(N: int) -> np.ndarray:
    """``K[n, n_z] = binom(N, n) sum_k binom(N-n, n_z-k) binom(n, k) (-1)^k`` (exact)."""
    K = np.zeros((N + 1, N + 1))
    for n in range(N + 1):
        for nz in range(N + 1):
            tot = 0
            for k in range(0, min(n, nz) + 1):
                if nz - k <= N - n:
                    tot += comb(N - n, nz - k) * comb(n, k) * (-1) ** k
            K[n, nz] = comb(N, n) * tot
    return K


def observables_sym(state: SymmetricState) -> SymObservables:
    N = state.N
    c = state.coeff
    sz = (c(1, 0, 0) * N / 2 * 2.0**N).real if N >= 1 else 0.0
    sx = (N / 2 * 2.0 ** (N - 1) * (c(0, 0, 1) + c(0, 1, 0))).real
    sy = (1j * N / 2 * 2.0 ** (N - 1) * (c(0, 1, 0) - c(0, 0, 1))).real
    diag = np.array([c(nz, 0, 0) for nz in range(N + 1)])
    p0 = float(np.sum(diag * np.array([comb(N, k) for k in range(N + 1)])).real)
    pn = (_flip_kernel(N) @ diag).real
    sz2 = N / 4.0 + (2.0**N / 2 * comb(N, 2) * c(2, 0, 0)).real if N >= 2 else N / 4.0
    return SymObservables(float(sx), float(sy), float(sz), p0, pn, float(sz2))


def mqc_from_sym(state: SymmetricState, axis: SpinAxis) -> MqcSpectrum:
    """``I_m = sum_{n_+ - n_- = m} |c|^2 tr(rho_alpha rho_alpha^dag)``."""
    N = state.N
    Z = _cube_align(N, state._cube, axis)
    w = np.abs(Z) ** 2
    values = np.zeros(2 * N + 1)
    per_pm = w.sum(axis=0)  # (n_+, n_-)
    grid = _order_grid(N)[0]
    np.add.at(values, (grid + N).ravel(), per_pm.ravel())
    return MqcSpectrum(N, values, "direct")


def partial_trace_sym(state: SymmetricState, n_traced: int) -> SymmetricState:
    """Trace out ``n_traced`` particles: ``c^(N-n) = 2^n c^(N)``."""
    N = state.N
    if not 0 <= n_traced < N:
        raise ValueError(f"need 0 <= n_traced < N={N}")
    if n_traced == 0:
        return state
    M = N - n_traced
    lay = layout(M)
    c = np.array(
        [state.coeff(z, p, m) for p, m, z in zip(lay.n_plus, lay.n_minus, lay.n_z)]
    ) * 2.0**n_traced
    return SymmetricState(M, c)
