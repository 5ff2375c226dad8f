"""Entanglement witnesses built on MQC spectra and Fisher information."""

from __future__ import annotations

from dataclasses import dataclass
from math import exp

import numpy as np

from .params import DecoherenceRates
from .spectrum import MqcSpectrum, f_i, log_css_intensity

VIOLATION_MARGIN = 1e-12
DEPTH_MARGIN = 1e-12


def separable_bound(N: int, m: int) -> float:
    """Largest ``I_m`` reachable by a fully separable state of ``N`` spins.

    Maximum over ``N_+`` (number of spins in an equal superposition, the rest
    in a ``S_n`` eigenstate) of the coherent-state intensity on ``N_+`` spins.
    """
    m = abs(int(m))
    if N < 0 or m > N:
        raise ValueError(f"need |m| <= N, got N={N}, m={m}")
    return exp(max(log_css_intensity(n_plus, m) for n_plus in range(m, N + 1)))


def separable_bounds(N: int) -> np.ndarray:
    """:func:`separable_bound` for ``m = -N..N``."""
    half = [separable_bound(N, m) for m in range(N + 1)]
    return np.array(half[:0:-1] + half)


def qfi_threshold(N: int, k: int) -> int:
    """``b_k = n k^2 + (N - n k)^2`` with ``n = floor(N/k)``.

    A Fisher information above ``b_k`` implies (k+1)-particle entanglement.
    """
    if not 1 <= k <= N:
        raise ValueError(f"need 1 <= k <= N, got k={k}, N={N}")
    n = N // k
    return n * k * k + (N - n * k) ** 2


def entanglement_depth(fisher: float, N: int) -> int:
    """Largest ``k`` with ``fisher > b_{k-1}``; 0 if not even ``b_1 = N`` is exceeded."""
    depth = 0
    for k in range(2, N + 1):
        if fisher > qfi_threshold(N, k - 1) + DEPTH_MARGIN:
            depth = k
        else:
            break
    return depth


@dataclass(frozen=True)
class WitnessReport:
    spectrum: MqcSpectrum
    f_i: float
    separable_bounds: np.ndarray
    violations: np.ndarray
    entanglement_depth: int
    qfi: float | None = None
    qfi_depth: int | None = None
    squeezing_xi2: float | None = None

    @property
    def violated_orders(self) -> np.ndarray:
        return self.spectrum.orders[self.violations]

    @property
    def violation_ratio(self) -> np.ndarray:
        """``I_m`` divided by the separable bound."""
        return self.spectrum.values / self.separable_bounds

    def to_dict(self) -> dict:
        out = {
            "N": self.spectrum.N,
            "source": self.spectrum.source,
            "f_i": self.f_i,
            "entanglement_depth": self.entanglement_depth,
            "qfi": self.qfi,
            "qfi_depth": self.qfi_depth,
            "squeezing_xi2": self.squeezing_xi2,
            "orders": self.spectrum.orders.tolist(),
            "intensities": self.spectrum.values.tolist(),
            "separable_bounds": self.separable_bounds.tolist(),
            "violations": self.violations.tolist(),
        }
        return out


def witness_report(
    spectrum: MqcSpectrum, qfi: float | None = None, squeezing_xi2: float | None = None
) -> WitnessReport:
    N = spectrum.N
    bounds = separable_bounds(N)
    fi = f_i(spectrum)
    return WitnessReport(
        spectrum=spectrum,
        f_i=fi,
        separable_bounds=bounds,
        violations=spectrum.values > bounds + VIOLATION_MARGIN,
        entanglement_depth=entanglement_depth(fi, N),
        qfi=qfi,
        qfi_depth=None if qfi is None else entanglement_depth(qfi, N),
        squeezing_xi2=squeezing_xi2,
    )


# --- product states ---------------------------------------------------------


def single_particle_mqc(p: float) -> MqcSpectrum:
    """Spectrum of a pure spin-1/2 with probability ``p`` of spin up along the axis."""
    if not 0.0 <= p <= 1.0:
        raise ValueError(f"p must lie in [0, 1], got {p}")
    off = p * (1 - p)
    return MqcSpectrum(1, [off, p * p + (1 - p) ** 2, off])


def mqc_product(a: MqcSpectrum, b: MqcSpectrum) -> MqcSpectrum:
    """Spectrum of a tensor product: the convolution of the two spectra."""
    return MqcSpectrum(a.N + b.N, np.convolve(a.values, b.values))


def product_state_mqc(populations) -> MqcSpectrum:
    """Spectrum of a pure product state from per-spin up probabilities."""
    out = single_particle_mqc(populations[0])
    for p in populations[1:]:
        out = mqc_product(out, single_particle_mqc(p))
    return out


# --- protocol validity ------------------------------------------------------


def protocol_validity_check(rates: DecoherenceRates, tol: float = 1e-12) -> tuple[bool, str]:
    """Whether the echo overlap still equals ``sum_m I_m e^{-i m phi}`` under decoherence.

    True when the Raman rates are balanced, which includes pure elastic
    dephasing and no decoherence at all.
    """
    if not rates.any:
        return True, "no decoherence"
    if rates.gamma_ud == 0 and rates.gamma_du == 0:
        return True, "elastic dephasing only"
    if abs(rates.gamma_ud - rates.gamma_du) <= tol:
        return True, "balanced Raman rates"
    return False, (
        f"unbalanced Raman rates (ud={rates.gamma_ud:g}, du={rates.gamma_du:g}); "
        "the backward dissipator is not the adjoint of the forward one, so extracted "
        "spectra are uncalibrated"
    )


# --- squeezing ---------------------------------------------------------------


def squeezing_from_moments(N: int, mean, second, mean_spin_axis=None) -> float:
    """Wineland parameter ``N min Var(S_perp) / <S>^2``.

    ``second`` is the symmetrized second-moment matrix. The minimum is over
    directions perpendicular to ``mean_spin_axis`` (default: the mean spin).
    """
    mean = np.asarray(mean, dtype=float)
    norm = np.linalg.norm(mean)
    if norm < 1e-9:
        raise ValueError("mean spin vanishes; squeezing parameter undefined")
    n = mean / norm if mean_spin_axis is None else mean_spin_axis.vector
    length = float(mean @ n)
    if abs(length) < 1e-9:
        raise ValueError("mean spin has no component along the given axis")
    cov = np.asarray(second) - np.outer(mean, mean)
    # orthonormal basis of the plane perpendicular to n
    helper = np.eye(3)[np.argmin(np.abs(n))]
    u = np.cross(n, helper)
    u /= np.linalg.norm(u)
    v = np.cross(n, u)
    P = np.stack([u, v])
    var_min = np.linalg.eigvalsh(P @ cov @ P.T)[0]
    return float(N * var_min / length**2)
