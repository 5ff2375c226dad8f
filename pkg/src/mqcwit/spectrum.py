"""Multiple-quantum coherence spectra."""

from __future__ import annotations

from dataclasses import dataclass, field
from math import lgamma, log

import numpy as np

SOURCES = ("direct", "protocol")


@dataclass(frozen=True)
class MqcSpectrum:
    """Intensities ``I_m`` for ``m = -N..N``.

    ``values[m + N]`` holds ``I_m``.  ``source`` records whether the spectrum
    was computed from the state ("direct") or Fourier-extracted from an echo
    signal ("protocol").
    """

    N: int
    values: np.ndarray
    source: str = "direct"
    diagnostics: dict = field(default_factory=dict, compare=False)

    def __post_init__(self):
        vals = np.asarray(self.values, dtype=float)
        if vals.shape != (2 * self.N + 1,):
            raise ValueError(f"expected {2 * self.N + 1} values for N={self.N}, got {vals.shape}")
        if self.source not in SOURCES:
            raise ValueError(f"source must be one of {SOURCES}")
        vals.setflags(write=False)
        object.__setattr__(self, "values", vals)

    @property
    def orders(self) -> np.ndarray:
        return np.arange(-self.N, self.N + 1)

    def __getitem__(self, m: int) -> float:
        if abs(m) > self.N:
            raise IndexError(f"coherence order {m} outside [-{self.N}, {self.N}]")
        return float(self.values[m + self.N])

    @property
    def purity(self) -> float:
        """Sum of all intensities, equal to tr(rho^2)."""
        return float(self.values.sum())

    @property
    def f_i(self) -> float:
        return f_i(self)


def f_i(spectrum: MqcSpectrum) -> float:
    """Fisher-information lower bound ``2 sum_m m^2 I_m``."""
    m = spectrum.orders
    return float(2.0 * np.sum(m.astype(float) ** 2 * spectrum.values))


def log_css_intensity(n: int, m: int) -> float:
    """log of ``(2n)! / (4^n (n-m)! (n+m)!)``; ``-inf`` when ``|m| > n``."""
    m = abs(m)
    if m > n:
        return -np.inf
    return lgamma(2 * n + 1) - n * log(4.0) - lgamma(n - m + 1) - lgamma(n + m + 1)


def css_spectrum_closed_form(N: int, m: int) -> float:
    """``I_m`` of an equatorial coherent spin state of ``N`` spins."""
    if N < 0 or abs(m) > N:
        raise ValueError(f"need |m| <= N, got N={N}, m={m}")
    return float(np.exp(log_css_intensity(N, m)))


def css_spectrum(N: int) -> MqcSpectrum:
    return MqcSpectrum(N, [css_spectrum_closed_form(N, m) for m in range(-N, N + 1)])
