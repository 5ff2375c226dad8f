"""Block-diagonal (total-spin) form of permutation-symmetric states.

A symmetric density matrix decomposes as ``rho = sum_J d_J (x) 1_{n_{N,J}}``
where ``d_J`` is a (2J+1)x(2J+1) matrix in the ``|J, M>`` basis (descending
``M``, standard phases) and ``n_{N,J}`` is the multiplicity of spin ``J``.

The matrix elements are obtained from the (up, down, +, -) operator basis,
reached from (z, +, -) by expanding ``1 = u + d`` and ``sigma_z = u - d``.
Writing ``X_alpha`` for the *average* of the strings in a symmetrized
up/down element, ``rho = sum_alpha x_alpha X_alpha`` with
``x_alpha = tr(E_alpha^dag rho)`` (the coefficient multiplied by the number
of strings), and each ``d_{J,M,M'}`` is a fixed linear functional of ``x``:

* ``<N/2, N/2| X |N/2, N/2>`` picks out ``X(N, 0, 0, 0)``;
* ``X S_- = n_down X(n_up, n_down-1, n_+, n_-+1) + n_+ X(n_up+1, n_down, n_+-1, n_-)``
  lowers ``M'`` along a row;
* hermiticity gives the first column from the first row;
* ``x(N/2+J, N/2-J, 0, 0) = tr(P_{M=J} rho) = sum_{J' >= J} n_{N,J'} d_{J',J,J}``
  seeds the top-left element of each lower block.

The last step cancels catastrophically for N beyond ~30, so by default the
lower blocks are instead read off after contracting singlet pairs (see
:func:`build_dicke_blocks`).
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache
from math import comb, factorial, lgamma

import numpy as np
import scipy.sparse as sp

from .dicke import spin_matrices
from .params import SpinAxis
from .symmetric import SymmetricState, layout

EIG_CUTOFF = 1e-14


def degeneracy(N: int, J: float) -> int:
    """Multiplicity of total spin ``J`` among ``N`` spin-1/2 particles."""
    two_j = round(2 * J)
    if abs(2 * J - two_j) > 1e-12 or two_j < 0 or two_j > N or (N - two_j) % 2:
        raise ValueError(f"J={J} is not an allowed total spin for N={N}")
    a = (N + two_j) // 2  # N/2 + J
    b = (N - two_j) // 2  # N/2 - J
    return factorial(N) * (two_j + 1) // (factorial(a + 1) * factorial(b))


def spin_ladder(N: int) -> list[int]:
    """Allowed values of ``2J`` from ``N`` downward."""
    return list(range(N, -1, -2))


# --- basis change -----------------------------------------------------------


@lru_cache(maxsize=None)
def _krawtchouk(q: int) -> np.ndarray:
    """``K[n_up, n_z]``: coefficient of a (u/d) string with n_up ups in a symmetrized (1/z) string."""
    K = np.zeros((q + 1, q + 1))
    for nu in range(q + 1):
        nd = q - nu
        for nz in range(q + 1):
            K[nu, nz] = sum(
                comb(nu, nz - k) * comb(nd, k) * (-1) ** k for k in range(max(0, nz - nu), min(nz, nd) + 1)
            )
    K.setflags(write=False)
    return K


@lru_cache(maxsize=None)
def _zpm_to_updown_normalized(q: int) -> np.ndarray:
    """Orthogonal map between normalized (n_z) and normalized (n_up) coefficients."""
    k = np.arange(q + 1)
    lb = np.array([lgamma(q + 1) - lgamma(i + 1) - lgamma(q - i + 1) for i in k])
    scale = np.exp(0.5 * (lb[:, None] - lb[None, :]) - 0.5 * q * np.log(2.0))
    T = _krawtchouk(q) * scale
    T.setflags(write=False)
    return T


@lru_cache(maxsize=32)
def _updown_log_mult(N: int) -> np.ndarray:
    """log of N!/(n_up! n_down! n_+! n_-!) over the flat layout (n_z slot holds n_up)."""
    lay = layout(N)
    nu, p, m = lay.n_z, lay.n_plus, lay.n_minus
    nd = N - nu - p - m
    lg = np.vectorize(lambda k: lgamma(k + 1))
    out = lgamma(N + 1) - lg(nu) - lg(nd) - lg(p) - lg(m)
    out.setflags(write=False)
    return out


def _normalized_updown(state: SymmetricState) -> np.ndarray:
    """Normalized up/down coefficients in the flat layout (n_z slot holds n_up)."""
    N = state.N
    Z = state._cube
    U = np.zeros_like(Z)
    for s in range(N + 1):
        q = N - s
        p = np.arange(s + 1)
        U[: q + 1, p, s - p] = _zpm_to_updown_normalized(q) @ Z[: q + 1, p, s - p]
    return U.reshape(-1)[layout(N).cube_index]


def zpm_to_updown(state: SymmetricState) -> np.ndarray:
    """Coefficients ``x(n_up, n_down, n_+, n_-)`` with the string-count reweighting.

    Returned in the flat layout of :func:`mqcwit.symmetric.layout` with the
    ``n_z`` slot holding ``n_up``; the index ranges coincide.
    """
    return _normalized_updown(state) * np.exp(0.5 * _updown_log_mult(state.N))


def updown_to_zpm(N: int, x) -> SymmetricState:
    """Inverse of :func:`zpm_to_updown`."""
    lay = layout(N)
    u = np.asarray(x, dtype=complex) * np.exp(-0.5 * _updown_log_mult(N))
    U = np.zeros((N + 1) ** 3, dtype=complex)
    U[lay.cube_index] = u
    U = U.reshape(N + 1, N + 1, N + 1)
    Z = np.zeros_like(U)
    for s in range(N + 1):
        q = N - s
        p = np.arange(s + 1)
        Z[: q + 1, p, s - p] = _zpm_to_updown_normalized(q).T @ U[: q + 1, p, s - p]
    return SymmetricState._from_normalized_cube(N, Z, check=True)


def dicke_to_sym(state) -> SymmetricState:
    """``|psi><psi|`` of a Dicke-manifold state in the symmetric operator basis.

    ``|D_a><D_b| = sum_{n_down} E(n_up, n_down, b - n_down, a - n_down) / sqrt(C(N,a) C(N,b))``
    where ``D_k`` has ``k`` spins down.
    """
    N = state.N
    amps = np.asarray(state.amps)
    lay = layout(N)
    nu, p, m = lay.n_z, lay.n_plus, lay.n_minus
    nd = N - nu - p - m
    a = nd + m  # downs in the ket
    b = nd + p  # downs in the bra
    log_binom = np.array([lgamma(N + 1) - lgamma(k + 1) - lgamma(N - k + 1) for k in range(N + 1)])
    c = amps[a] * amps[b].conj() * np.exp(-0.5 * (log_binom[a] + log_binom[b]))
    return updown_to_zpm(N, c * np.exp(_updown_log_mult(N)))


# --- matrix-element functionals ---------------------------------------------


def _support(N, two_m, two_mp, ps):
    n_minus2 = 2 * ps - (two_m - two_mp)
    n_up2 = N - 2 * ps + two_m
    n_down2 = N - 2 * ps - two_mp
    return (n_minus2 >= 0) & (n_up2 >= 0) & (n_down2 >= 0)


def _lower_column(N, ps, two_j, two_m, old, two_mp):
    """``<J M| X |J M'-1>`` from ``<J M| X |J M'>`` via ``X S_-``."""
    new_mp = two_mp - 2
    n_down = (N - 2 * ps - new_mp) / 2.0
    shifted = np.concatenate(([0.0], old[:-1]))
    norm = np.sqrt((two_j + two_mp) * (two_j - two_mp + 2) / 4.0)
    return (n_down * old + ps * shifted) / norm * _support(N, two_m, new_mp, ps)


def _block_functionals(N, two_j, seed):
    """All ``<J M| X(alpha) |J M'>`` of one block from its top-left element.

    Values are arrays over ``p = n_+``; the other occupations follow from
    ``(M, M')``.
    """
    ps = np.arange(N + 1)
    ell = {(two_j, two_j): seed * _support(N, two_j, two_j, ps)}
    for two_mp in range(two_j, -two_j, -2):
        ell[(two_j, two_mp - 2)] = _lower_column(N, ps, two_j, two_j, ell[(two_j, two_mp)], two_mp)
    for two_m in range(two_j - 2, -two_j - 1, -2):
        shift = (two_m - two_j) // 2  # m = M - J <= 0
        col = np.zeros(N + 1)
        p = ps[ps - shift <= N]
        col[p] = ell[(two_j, two_m)][p - shift]
        ell[(two_m, two_j)] = col * _support(N, two_m, two_j, ps)
        for two_mp in range(two_j, -two_j, -2):
            ell[(two_m, two_mp - 2)] = _lower_column(N, ps, two_j, two_m, ell[(two_m, two_mp)], two_mp)
    return ell


def _functional_matrix(N, per_block):
    """Stack per-block functionals into a sparse map acting on normalized coefficients."""
    lay = layout(N)
    flat_of = {(int(nu), int(p), int(m)): i for i, (p, m, nu) in enumerate(zip(lay.n_plus, lay.n_minus, lay.n_z))}
    log_mult = _updown_log_mult(N)
    rows, cols, vals = [], [], []
    row = 0
    for two_j, ell in per_block:
        for two_m in range(two_j, -two_j - 1, -2):
            for two_mp in range(two_j, -two_j - 1, -2):
                vec = ell[(two_m, two_mp)]
                for p in np.nonzero(vec)[0]:
                    idx = flat_of[((N - 2 * int(p) + two_m) // 2, int(p), int(p) - (two_m - two_mp) // 2)]
                    rows.append(row)
                    cols.append(idx)
                    vals.append(vec[p] * np.exp(0.5 * log_mult[idx]))  # x = normalized * sqrt(mult)
                row += 1
    return sp.csr_matrix((vals, (rows, cols)), shape=(row, len(lay.n_z)))


@lru_cache(maxsize=64)
def _top_functionals(N: int) -> sp.csr_matrix:
    """Map from normalized up/down coefficients to the ``J = N/2`` block (row-major)."""
    seed = np.zeros(N + 1)
    seed[0] = 1.0  # <N/2 N/2| X |N/2 N/2> selects X(N, 0, 0, 0)
    return _functional_matrix(N, [(N, _block_functionals(N, N, seed))])


@lru_cache(maxsize=8)
def _recursive_functionals(N: int) -> sp.csr_matrix:
    """All blocks, lower ones seeded through the trace identity.

    Faithful to the textbook construction but numerically unstable: the
    subtraction loses roughly half a digit per particle (errors ~1e-10 at
    N = 30).  Used as an independent cross-check at small N.
    """
    ps = np.arange(N + 1)
    per_block = []
    diag = {}  # (2J', 2M) -> <J' M| X |J' M> arrays
    for two_j in spin_ladder(N):
        seed = np.zeros(N + 1)
        seed[0] = 1.0  # x(N/2 + J, N/2 - J, 0, 0)
        for (two_jp, two_m), arr in diag.items():
            if two_m == two_j:
                seed -= degeneracy(N, two_jp / 2) * arr
        seed /= degeneracy(N, two_j / 2)
        ell = _block_functionals(N, two_j, seed * _support(N, two_j, two_j, ps))
        for two_m in range(two_j, -two_j - 1, -2):
            diag[(two_j, two_m)] = ell[(two_m, two_m)]
        per_block.append((two_j, ell))
    return _functional_matrix(N, per_block)


def _unit_cube(state: SymmetricState) -> np.ndarray:
    N = state.N
    lay = layout(N)
    C = np.zeros((N + 1) ** 3, dtype=complex)
    C[lay.cube_index] = state.coeffs
    return C.reshape(N + 1, N + 1, N + 1)


def singlet_contraction(C: np.ndarray, N: int, k: int) -> np.ndarray:
    """Unit-weight coefficient cube of ``<s|^k rho |s>^k`` on the remaining ``N - 2k`` spins.

    ``|s>`` is a two-spin singlet.  Per pair ``<s|1 1|s> = 1``,
    ``<s|z z|s> = -1`` and ``<s|+ -|s> = <s|- +|s> = -1/2``; all other
    pairs vanish.
    """
    n = N - 2 * k
    out = np.zeros((n + 1,) * 3, dtype=complex)
    for a in range(k + 1):
        for e in range(k + 1 - a):
            coef = (-1) ** (a + e) * (factorial(k) // (factorial(a) * factorial(e) * factorial(k - a - e)))
            out += coef * C[2 * a : 2 * a + n + 1, e : e + n + 1, e : e + n + 1]
    return out


def _top_block_from_unit_cube(Cn: np.ndarray, n: int) -> np.ndarray:
    if n == 0:
        return Cn.reshape(1, 1)
    lay = layout(n)
    Z = np.zeros((n + 1) ** 3, dtype=complex)
    Z[lay.cube_index] = Cn.reshape(-1)[lay.cube_index] * np.exp(0.5 * lay.log_norm)
    tmp = SymmetricState._from_normalized_cube(n, Z.reshape((n + 1,) * 3))
    return (_top_functionals(n) @ _normalized_updown(tmp)).reshape(n + 1, n + 1)


# --- block matrix -----------------------------------------------------------


class DickeBlockMatrix:
    """Per-``J`` blocks ``d_J`` with multiplicities ``n_{N,J}``."""

    def __init__(self, N: int, blocks: dict):
        self.N = N
        self.blocks = {}
        for two_j in spin_ladder(N):
            b = np.asarray(blocks[two_j], dtype=complex)
            if b.shape != (two_j + 1, two_j + 1):
                raise ValueError(f"block 2J={two_j} has shape {b.shape}")
            b = b.copy()
            b.setflags(write=False)
            self.blocks[two_j] = b
        self.degeneracies = {two_j: degeneracy(N, two_j / 2) for two_j in spin_ladder(N)}
        self._eig = None

    def trace(self) -> float:
        return float(sum(self.degeneracies[j] * np.trace(b).real for j, b in self.blocks.items()))

    def purity(self) -> float:
        return float(sum(self.degeneracies[j] * np.sum(np.abs(b) ** 2) for j, b in self.blocks.items()))

    def hermiticity_error(self) -> float:
        return max(float(np.abs(b - b.conj().T).max()) for b in self.blocks.values())

    def eig(self):
        """``{2J: (eigenvalues, eigenvectors)}`` of each hermitized block."""
        if self._eig is None:
            self._eig = {j: np.linalg.eigh(0.5 * (b + b.conj().T)) for j, b in self.blocks.items()}
        return self._eig

    def spectrum(self) -> np.ndarray:
        """Eigenvalues of the full 2^N x 2^N matrix, with multiplicity (small N only)."""
        parts = [np.repeat(vals, self.degeneracies[j]) for j, (vals, _) in self.eig().items()]
        return np.sort(np.concatenate(parts))

    def min_eigenvalue(self) -> float:
        return float(min(vals.min() for vals, _ in self.eig().values()))

    def validate(self, tol: float = 1e-9):
        if abs(self.trace() - 1) > tol:
            raise ValueError(f"trace {self.trace()} differs from 1")
        if self.hermiticity_error() > tol:
            raise ValueError("blocks are not hermitian")
        if self.min_eigenvalue() < -1e-8:
            raise ValueError(f"negative eigenvalue {self.min_eigenvalue()}")


def build_dicke_blocks(state: SymmetricState, method: str = "contraction", check: bool = True) -> DickeBlockMatrix:
    """Decompose a symmetric state into total-spin blocks.

    ``method="contraction"`` (default) takes the multiplicity label
    ``|J, M> = |s>^(N/2-J) (x) |Dicke_{2J}, M>`` and reads each block off as the
    top block of the singlet-contracted operator; only sums of non-negative
    terms enter the ladder recursion, so it stays accurate at N ~ 50.
    ``method="recursion"`` seeds every lower block through the trace identity
    and is only reliable for small N.
    """
    N = state.N
    blocks = {}
    if method == "contraction":
        C = _unit_cube(state)
        for two_j in spin_ladder(N):
            k = (N - two_j) // 2
            blocks[two_j] = _top_block_from_unit_cube(singlet_contraction(C, N, k), two_j)
    elif method == "recursion":
        d = _recursive_functionals(N) @ _normalized_updown(state)
        off = 0
        for two_j in spin_ladder(N):
            n = two_j + 1
            blocks[two_j] = d[off : off + n * n].reshape(n, n)
            off += n * n
    else:
        raise ValueError(f"unknown method {method!r}")
    out = DickeBlockMatrix(N, blocks)
    if check:
        herm = out.hermiticity_error()
        if herm > 1e-7 or abs(out.trace() - 1) > 1e-7:
            raise RuntimeError(
                f"Dicke block construction inconsistent (hermiticity error {herm:.3g}, trace {out.trace():.12g})"
            )
    return out


# --- derived quantities -----------------------------------------------------


def _block_ops(two_j):
    return spin_matrices(two_j)


def spin_moments(blocks: DickeBlockMatrix):
    """Mean spin vector and symmetrized second moments ``<{S_a, S_b}>/2``."""
    mean = np.zeros(3)
    second = np.zeros((3, 3))
    for two_j, b in blocks.blocks.items():
        w = blocks.degeneracies[two_j]
        ops = _block_ops(two_j)
        for a in range(3):
            mean[a] += w * np.trace(ops[a] @ b).real
            for c in range(3):
                second[a, c] += w * 0.5 * np.trace((ops[a] @ ops[c] + ops[c] @ ops[a]) @ b).real
    return mean, second


def _fisher_matrices(blocks: DickeBlockMatrix, cutoff: float = 1e-12):
    fq = np.zeros((3, 3))
    fi = np.zeros((3, 3))
    for two_j, (lam, vecs) in blocks.eig().items():
        w = blocks.degeneracies[two_j]
        lam = np.clip(lam, 0.0, None)
        ssum = lam[:, None] + lam[None, :]
        diff2 = (lam[:, None] - lam[None, :]) ** 2
        kq = np.where(ssum > cutoff, diff2 / np.where(ssum > cutoff, ssum, 1.0), 0.0)
        ops = [vecs.conj().T @ o @ vecs for o in _block_ops(two_j)]
        for a in range(3):
            for c in range(a, 3):
                prod = (ops[a] * ops[c].T).real  # Re <k|S_a|l><l|S_c|k>
                fq[a, c] += 2 * w * np.sum(kq * prod)
                fi[a, c] += 2 * w * np.sum(diff2 * prod)
    for f in (fq, fi):
        f[np.tril_indices(3, -1)] = f[np.triu_indices(3, 1)]
    return fq, fi


def qfi_matrix(blocks: DickeBlockMatrix) -> np.ndarray:
    """3x3 matrix ``F`` with ``F_Q(n) = n^T F n``."""
    return _fisher_matrices(blocks)[0]


def fi_matrix(blocks: DickeBlockMatrix) -> np.ndarray:
    """3x3 matrix with ``2 sum_m m^2 I_m = n^T F n`` (equal to ``2||[S_n, rho]||^2``)."""
    return _fisher_matrices(blocks)[1]


def qfi_mixed(blocks: DickeBlockMatrix, axis: SpinAxis) -> float:
    """Quantum Fisher information for rotations generated by ``S_n``."""
    n = axis.vector
    return float(np.clip(n @ qfi_matrix(blocks) @ n, 0.0, blocks.N**2))


def entropies(blocks: DickeBlockMatrix):
    """Natural-log von Neumann and Renyi-2 entropies."""
    vn = 0.0
    p2 = 0.0
    for two_j, (lam, _) in blocks.eig().items():
        w = blocks.degeneracies[two_j]
        lam = lam[lam > EIG_CUTOFF]
        vn -= w * np.sum(lam * np.log(lam))
        p2 += w * np.sum(lam**2)
    return Entropies(float(vn), float(-np.log(p2)))


@dataclass(frozen=True)
class Entropies:
    von_neumann: float
    renyi2: float


def dimension_identities(N: int) -> tuple[bool, bool]:
    """``sum n_{N,J}(2J+1) == 2^N`` and ``sum (2J+1)^2 == binom(N+3, 3)`` in exact integers."""
    ladder = spin_ladder(N)
    full = sum(degeneracy(N, j / 2) * (j + 1) for j in ladder) == 2**N
    sym = sum((j + 1) ** 2 for j in ladder) == comb(N + 3, 3)
    return full, sym
