"""Time-reversal echo protocol, spectrum extraction and axis optimization.

Three interchangeable engines carry out the same sequence

    rho_0 --(forward t)--> rho_t --exp(-i S_n phi)--> --(backward t)--> rho_f,
    F(phi) = tr(rho_0 rho_f),

on pure Dicke states (no decoherence), permutation-symmetric density
matrices (twisting about z, no transverse field), or full 2^N matrices
(small N only).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy import optimize

from . import blocks as _blocks
from . import dicke as _dicke
from . import exact as _exact
from . import symmetric as _sym
from .params import NO_DECOHERENCE, DecoherenceRates, ModelParams, SpinAxis, Z_AXIS
from .spectrum import MqcSpectrum
from .witness import protocol_validity_check, squeezing_from_moments

BACKENDS = ("dicke_pure", "sym_liouville", "exact_oracle")
BACKEND_ALIASES = {"dicke": "dicke_pure", "sym": "sym_liouville", "exact": "exact_oracle"}

NEGATIVE_CLIP = 1e-8
IMAG_TOL = 1e-8


def backend_problems(params: ModelParams, rates: DecoherenceRates, backend: str) -> list[str]:
    """Reasons why ``backend`` cannot simulate ``params`` with ``rates`` (empty if it can)."""
    out = []
    if backend == "dicke_pure":
        if rates.any:
            out.append("dicke_pure simulates pure states only; set all decoherence rates to 0")
    elif backend == "sym_liouville":
        if params.twist != "z":
            out.append("sym_liouville works in the z-twist frame; set twist='z'")
        if params.Omega != 0:
            out.append("sym_liouville cannot include a transverse field; set Omega=0")
    elif backend == "exact_oracle":
        cap = _exact.MAX_N_LINDBLAD if rates.any else _exact.MAX_N
        if params.N > cap:
            out.append(f"exact_oracle is limited to N <= {cap} for these rates")
    else:
        out.append(f"unknown backend {backend!r}; choose from {BACKENDS}")
    return out


def resolve_backend(params: ModelParams, rates: DecoherenceRates, backend: str = "auto") -> str:
    """Pick an engine; ``auto`` prefers dicke_pure, then sym_liouville, then exact_oracle."""
    backend = BACKEND_ALIASES.get(backend, backend)
    if backend == "auto":
        for cand in BACKENDS:
            if not backend_problems(params, rates, cand):
                return cand
        raise ValueError(
            "no engine supports this configuration: decoherence with a transverse field or with "
            f"twist='x' needs the exact oracle, which is limited to N <= {_exact.MAX_N_LINDBLAD} "
            f"(got N={params.N}); use twist='z' with Omega=0, drop the rates, or reduce N"
        )
    problems = backend_problems(params, rates, backend)
    if problems:
        raise ValueError("; ".join(problems))
    return backend


@dataclass(frozen=True)
class ProtocolConfig:
    params: ModelParams
    rates: DecoherenceRates = NO_DECOHERENCE
    t: float = 0.0
    axis: SpinAxis = Z_AXIS
    phi_samples: int | None = None
    backend: str = "auto"

    def __post_init__(self):
        if not math.isfinite(self.t) or self.t < 0:
            raise ValueError(f"t must be finite and >= 0, got {self.t}")
        N = self.params.N
        k = 4 * (N + 1) if self.phi_samples is None else int(self.phi_samples)
        if k < 2 * N + 1:
            raise ValueError(f"phi_samples must be >= 2N+1 = {2 * N + 1} to resolve all orders, got {k}")
        object.__setattr__(self, "phi_samples", k)
        object.__setattr__(self, "t", float(self.t))
        object.__setattr__(self, "backend", resolve_backend(self.params, self.rates, self.backend))

    @property
    def phis(self) -> np.ndarray:
        return 2 * np.pi * np.arange(self.phi_samples) / self.phi_samples


# --- engines -----------------------------------------------------------------


class _DickeEngine:
    def __init__(self, params, rates):
        self.params = params

    def initial(self):
        return _dicke.initial_state(self.params)

    def evolve(self, state, t, direction="forward"):
        return _dicke.evolve_pure(state, self.params, t if direction == "forward" else -t)

    def rotations(self, state, axis, phis):
        for phi in phis:
            yield _dicke.rotate_pure(state, axis, phi)

    @staticmethod
    def overlap(a, b):
        return abs(np.vdot(a.amps, b.amps)) ** 2


class _SymEngine:
    def __init__(self, params, rates):
        self.params = params
        self.gen = _sym.build_generator(params, rates)

    def initial(self):
        return _sym.initial_sym(self.params)

    def evolve(self, state, t, direction="forward"):
        return _sym.evolve_sym(state, self.gen, t, direction)

    def rotations(self, state, axis, phis):
        N = state.N
        aligned = _sym._cube_align(N, state._cube, axis)
        for phi in phis:
            Z = _sym._cube_align(N, _sym._cube_rotate_z(N, aligned, phi), axis, inverse=True)
            yield _sym.SymmetricState._from_normalized_cube(N, Z)

    overlap = staticmethod(_sym.overlap_sym)


class _ExactEngine:
    def __init__(self, params, rates):
        self.params = params
        self.rates = rates

    def initial(self):
        return _exact.initial_full(self.params)

    def evolve(self, state, t, direction="forward"):
        return _exact.evolve_lindblad_full(state, self.params, self.rates, t, direction)

    def rotations(self, state, axis, phis):
        for phi in phis:
            yield _exact.rotate_full(state, axis, phi)

    overlap = staticmethod(_exact.overlap)


_ENGINES = {"dicke_pure": _DickeEngine, "sym_liouville": _SymEngine, "exact_oracle": _ExactEngine}


def engine(params: ModelParams, rates: DecoherenceRates = NO_DECOHERENCE, backend: str = "auto"):
    name = resolve_backend(params, rates, backend)
    return _ENGINES[name](params, rates)


def simulate(params, rates=NO_DECOHERENCE, t=0.0, backend="auto", initial=None):
    """Forward-evolved state ``rho_t`` from the engine's fiducial (or the given) initial state."""
    eng = engine(params, rates, backend)
    state = eng.initial() if initial is None else initial
    return eng.evolve(state, t, "forward")


# --- echo protocol -------------------------------------------------------------


@dataclass(frozen=True)
class EchoSignal:
    N: int
    phi: np.ndarray
    fidelity: np.ndarray
    diagnostics: dict = field(default_factory=dict, compare=False)

    def pairs(self):
        return list(zip(self.phi.tolist(), self.fidelity.tolist()))


def run_echo_protocol(cfg: ProtocolConfig, initial=None) -> EchoSignal:
    """Sample ``F(phi) = tr(rho_0 rho_f)`` on the uniform grid of ``cfg``."""
    eng = _ENGINES[cfg.backend](cfg.params, cfg.rates)
    rho0 = eng.initial() if initial is None else initial
    if rho0.N != cfg.params.N:
        raise ValueError("initial state does not match params.N")
    rho_t = eng.evolve(rho0, cfg.t, "forward")
    phis = cfg.phis
    values = np.array(
        [eng.overlap(rho0, eng.evolve(r, cfg.t, "backward")) for r in eng.rotations(rho_t, cfg.axis, phis)]
    )
    if values.min() < -1e-9 or values.max() > 1 + 1e-9:
        raise RuntimeError(f"echo overlap left [0, 1]: range [{values.min()}, {values.max()}]")
    valid, reason = protocol_validity_check(cfg.rates)
    return EchoSignal(cfg.params.N, phis, values, {"calibrated": valid, "validity": reason, "backend": cfg.backend})


def extract_mqc(phi, fidelity, N: int, strict: bool = True) -> MqcSpectrum:
    """Fourier-invert ``F(phi) = sum_m I_m e^{-i m phi}`` on a uniform grid.

    The inversion is exact when the grid has at least ``2N+1`` points.
    ``strict=False`` keeps significantly negative intensities instead of
    raising; used for uncalibrated runs with unbalanced Raman rates.
    """
    phi = np.asarray(phi, dtype=float)
    F = np.asarray(fidelity, dtype=float)
    K = len(phi)
    if F.shape != (K,):
        raise ValueError("phi and fidelity must have equal length")
    if K < 2 * N + 1:
        raise ValueError(f"need at least 2N+1 = {2 * N + 1} samples, got {K}")
    grid = 2 * np.pi * np.arange(K) / K
    if np.abs(phi - grid).max() > 1e-12:
        raise ValueError("phi must be the uniform grid 2*pi*j/K, j = 0..K-1")
    m = np.arange(-N, N + 1)
    raw = np.exp(1j * np.outer(m, phi)) @ F / K
    imag = float(np.abs(raw.imag).max())
    sym = 0.5 * (raw.real + raw.real[::-1])
    asym = float(np.abs(raw.real - raw.real[::-1]).max())
    low = float(sym.min())
    if low < -NEGATIVE_CLIP and strict:
        raise ValueError(f"extracted intensity {low:.3g} is significantly negative")
    values = np.where((sym < 0) & (sym > -NEGATIVE_CLIP), 0.0, sym)
    diag = {"imag_residue": imag, "asymmetry": asym, "min_raw": low, "samples": K}
    if imag > IMAG_TOL:
        diag["warning"] = f"imaginary residue {imag:.3g} exceeds {IMAG_TOL}"
    return MqcSpectrum(N, values, "protocol", diag)


def echo_spectrum(cfg: ProtocolConfig, initial=None) -> MqcSpectrum:
    """Run the protocol and extract the spectrum; uncalibrated runs are tagged."""
    sig = run_echo_protocol(cfg, initial)
    spec = extract_mqc(sig.phi, sig.fidelity, cfg.params.N, strict=sig.diagnostics["calibrated"])
    spec.diagnostics.update(sig.diagnostics)
    return spec


# --- direct quantities ---------------------------------------------------------


def direct_mqc(state, axis: SpinAxis) -> MqcSpectrum:
    if isinstance(state, _dicke.DickeState):
        return _dicke.mqc_direct_pure(state, axis)
    if isinstance(state, _sym.SymmetricState):
        return _sym.mqc_from_sym(state, axis)
    if isinstance(state, _exact.FullDensityMatrix):
        return _exact.mqc_direct_full(state, axis)
    raise TypeError(f"unsupported state type {type(state).__name__}")


_PROBE_AXES = (
    (1.0, 0.0, 0.0),
    (0.0, 1.0, 0.0),
    (0.0, 0.0, 1.0),
    (1.0, 1.0, 0.0),
    (1.0, 0.0, 1.0),
    (0.0, 1.0, 1.0),
)


def quadratic_form_from_axes(f) -> np.ndarray:
    """Recover ``M`` from ``f(n) = n^T M n`` evaluated on six axes."""
    vals = [f(SpinAxis.normalized(v)) for v in _PROBE_AXES]
    M = np.diag(vals[:3])
    for k, (a, b) in zip(range(3, 6), ((0, 1), (0, 2), (1, 2))):
        M[a, b] = M[b, a] = vals[k] - 0.5 * (vals[a] + vals[b])
    return M


@dataclass(frozen=True)
class FisherForms:
    """3x3 matrices giving ``F_I(n)`` and ``F_Q(n)`` as ``n^T M n``."""

    fi: np.ndarray
    qfi: np.ndarray | None

    def f_i(self, axis: SpinAxis) -> float:
        n = axis.vector
        return float(n @ self.fi @ n)

    def f_q(self, axis: SpinAxis) -> float:
        if self.qfi is None:
            raise ValueError("QFI was not computed")
        n = axis.vector
        return float(n @ self.qfi @ n)


def fisher_forms(state, qfi: bool = True) -> FisherForms:
    if isinstance(state, _dicke.DickeState):
        F = 4.0 * _dicke.covariance_matrix(state)
        return FisherForms(F, F.copy())
    if isinstance(state, _sym.SymmetricState):
        fi = quadratic_form_from_axes(lambda ax: _sym.mqc_from_sym(state, ax).f_i)
        fq = _blocks.qfi_matrix(_blocks.build_dicke_blocks(state)) if qfi else None
        return FisherForms(fi, fq)
    if isinstance(state, _exact.FullDensityMatrix):
        fi = quadratic_form_from_axes(lambda ax: _exact.f_i_full(state, ax))
        fq = quadratic_form_from_axes(lambda ax: _exact.qfi_mixed_full(state, ax)) if qfi else None
        return FisherForms(fi, fq)
    raise TypeError(f"unsupported state type {type(state).__name__}")


def spin_moments(state):
    """Mean spin and symmetrized second moments for any engine's state."""
    if isinstance(state, _dicke.DickeState):
        return _dicke.spin_expectations(state)
    if isinstance(state, _sym.SymmetricState):
        return _blocks.spin_moments(_blocks.build_dicke_blocks(state))
    if isinstance(state, _exact.FullDensityMatrix):
        S = _exact.collective_spin(state.N)
        rho = state.rho
        mean = np.array([np.trace(s @ rho).real for s in S])
        second = np.array([[0.5 * np.trace((a @ b + b @ a) @ rho).real for b in S] for a in S])
        return mean, second
    raise TypeError(f"unsupported state type {type(state).__name__}")


def squeezing_parameter(state, mean_spin_axis: SpinAxis | None = None) -> float:
    """Wineland squeezing ``xi^2 = N min Var(S_perp) / |<S>|^2``."""
    mean, second = spin_moments(state)
    return squeezing_from_moments(state.N, mean, second, mean_spin_axis)


@dataclass(frozen=True)
class Entropies:
    von_neumann: float
    renyi2: float


def entropies_of(state, n_traced: int = 0) -> Entropies:
    """Entropies of the state with ``n_traced`` particles traced out."""
    if isinstance(state, _dicke.DickeState):
        state = _blocks.dicke_to_sym(state)
    if isinstance(state, _sym.SymmetricState):
        reduced = _sym.partial_trace_sym(state, n_traced)
        e = _blocks.entropies(_blocks.build_dicke_blocks(reduced))
        return Entropies(e.von_neumann, e.renyi2)
    if isinstance(state, _exact.FullDensityMatrix):
        reduced = _exact.partial_trace_full(state, n_traced) if n_traced else state
        lam = np.linalg.eigvalsh(reduced.rho)
        vn = _exact.von_neumann_entropy_full(reduced)
        return Entropies(vn, float(-np.log(np.sum(lam**2))))
    raise TypeError(f"unsupported state type {type(state).__name__}")


# --- axis optimization -----------------------------------------------------------


def _axis(theta, phi):
    return SpinAxis.from_angles(theta, phi)


def _tangent_chart(n):
    """Orthonormal ``u, v`` spanning the plane perpendicular to ``n``."""
    helper = np.eye(3)[np.argmin(np.abs(n))]
    u = np.cross(n, helper)
    u /= np.linalg.norm(u)
    return u, np.cross(n, u)


def maximize_on_sphere(f, grid=(24, 48), xtol: float = 1e-12):
    """Maximize ``f(SpinAxis)`` over the upper hemisphere (antipodes are equivalent).

    Coarse grid in (theta, phi) with ties broken by the lexicographically
    smallest (theta, phi), then Powell line searches (Brent) in a tangent-plane
    chart around the grid optimum, which has no coordinate singularity at the poles.
    Returns ``(axis, value)``.
    """
    n_theta, n_phi = grid
    thetas = np.linspace(0.0, np.pi / 2, n_theta)
    phis = 2 * np.pi * np.arange(n_phi) / n_phi
    best = None
    for th in thetas:
        for ph in phis[:1] if th == 0.0 else phis:
            v = f(_axis(th, ph))
            if best is None or v > best[0] + 1e-12 * max(1.0, abs(best[0])):
                best = (v, th, ph)
    val, th, ph = best
    n0 = _axis(th, ph).vector
    u, v = _tangent_chart(n0)

    def chart(x):
        return SpinAxis.normalized(n0 + x[0] * u + x[1] * v)

    step = thetas[1] - thetas[0]
    res = optimize.minimize(
        lambda x: -f(chart(x)),
        np.zeros(2),
        method="Powell",
        bounds=[(-2 * step, 2 * step)] * 2,
        options={"xtol": xtol, "ftol": 1e-15, "maxfev": 4000},
    )
    axis = chart(res.x) if -res.fun >= val else _axis(th, ph)
    if axis.n[2] < 0:
        axis = SpinAxis.normalized(-axis.vector)
    return axis, float(f(axis))


@dataclass(frozen=True)
class AxisOptimum:
    axis: SpinAxis
    value: float
    forms: FisherForms


def optimize_axis(
    params: ModelParams,
    rates: DecoherenceRates = NO_DECOHERENCE,
    t: float = 0.0,
    backend: str = "auto",
    grid=(24, 48),
    quantity: str = "f_i",
    state=None,
) -> AxisOptimum:
    """Axis maximizing ``F_I`` (or ``F_Q`` with ``quantity='qfi'``) for the state at time ``t``."""
    if state is None:
        state = simulate(params, rates, t, backend)
    forms = fisher_forms(state, qfi=(quantity == "qfi"))
    if quantity == "f_i":
        f = forms.f_i
    elif quantity == "qfi":
        f = forms.f_q
    else:
        raise ValueError("quantity must be 'f_i' or 'qfi'")
    axis, value = maximize_on_sphere(f, grid)
    return AxisOptimum(axis, value, forms)
