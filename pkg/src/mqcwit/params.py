"""Parameter containers shared by every engine.

All couplings and rates are in the same inverse-time unit; times in its
inverse.  Only the products ``J*t``, ``Omega*t`` and ``Gamma*t`` matter.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

TWIST_AXES = ("x", "z")


@dataclass(frozen=True)
class ModelParams:
    """All-to-all transverse-field Ising model.

    ``twist="x"`` gives ``H = -(J/N) S_x^2 - Omega S_z`` with the spins
    initially all up along z.  ``twist="z"`` is the same model rotated by the
    proper rotation (x, y, z) -> (z, -y, x): ``H = -(J/N) S_z^2 - Omega S_x``
    with the spins initially along +x.  The symmetric Liouville engine only
    handles the z-twist frame, since its dissipators are written in the
    z basis.
    """

    N: int
    J: float
    Omega: float = 0.0
    twist: str = "x"

    def __post_init__(self):
        if isinstance(self.N, bool) or not isinstance(self.N, (int, np.integer)) or self.N < 1:
            raise ValueError(f"N must be a positive integer, got {self.N!r}")
        if not (math.isfinite(self.J) and math.isfinite(self.Omega)):
            raise ValueError("J and Omega must be finite")
        if self.twist not in TWIST_AXES:
            raise ValueError(f"twist must be one of {TWIST_AXES}, got {self.twist!r}")
        object.__setattr__(self, "N", int(self.N))
        object.__setattr__(self, "J", float(self.J))
        object.__setattr__(self, "Omega", float(self.Omega))


@dataclass(frozen=True)
class DecoherenceRates:
    """Single-spin Raman flips (ud: up->down, du: down->up) and elastic dephasing."""

    gamma_ud: float = 0.0
    gamma_du: float = 0.0
    gamma_el: float = 0.0

    def __post_init__(self):
        for name in ("gamma_ud", "gamma_du", "gamma_el"):
            val = float(getattr(self, name))
            if not math.isfinite(val) or val < 0:
                raise ValueError(f"{name} must be finite and >= 0, got {val}")
            object.__setattr__(self, name, val)

    @property
    def total(self) -> float:
        """Total rate (gamma_ud + gamma_du + gamma_el) / 2."""
        return 0.5 * (self.gamma_ud + self.gamma_du + self.gamma_el)

    @property
    def any(self) -> bool:
        return self.gamma_ud > 0 or self.gamma_du > 0 or self.gamma_el > 0

    @classmethod
    def from_total(cls, total: float, ratio=(1.0, 1.0, 10.0)) -> "DecoherenceRates":
        """Split a total rate ``(ud + du + el)/2`` according to ``ratio``."""
        r = np.asarray(ratio, dtype=float)
        if r.shape != (3,) or np.any(r < 0) or r.sum() == 0:
            raise ValueError("ratio must be three non-negative numbers, not all zero")
        scale = 2.0 * total / r.sum()
        return cls(*(scale * r))


NO_DECOHERENCE = DecoherenceRates()


@dataclass(frozen=True)
class SpinAxis:
    """Unit vector ``n`` defining the collective generator ``S_n = n . S``."""

    n: tuple = field(default=(0.0, 0.0, 1.0))

    def __post_init__(self):
        v = np.asarray(self.n, dtype=float)
        if v.shape != (3,) or not np.all(np.isfinite(v)):
            raise ValueError(f"axis must be a finite 3-vector, got {self.n!r}")
        if abs(np.linalg.norm(v) - 1.0) > 1e-12:
            raise ValueError(f"axis must have unit norm within 1e-12, got |n|={np.linalg.norm(v)!r}")
        object.__setattr__(self, "n", tuple(float(x) for x in v))

    @classmethod
    def normalized(cls, v) -> "SpinAxis":
        v = np.asarray(v, dtype=float)
        return cls(tuple(v / np.linalg.norm(v)))

    @classmethod
    def from_angles(cls, theta: float, phi: float) -> "SpinAxis":
        """Polar angle ``theta`` from +z, azimuth ``phi`` from +x."""
        return cls.normalized(
            (np.sin(theta) * np.cos(phi), np.sin(theta) * np.sin(phi), np.cos(theta))
        )

    @property
    def vector(self) -> np.ndarray:
        return np.array(self.n)

    @property
    def angles(self) -> tuple[float, float]:
        """(theta, phi) with theta in [0, pi] and phi in (-pi, pi]."""
        x, y, z = self.n
        # atan2 stays well conditioned near the poles, unlike arccos
        return float(np.arctan2(np.hypot(x, y), z)), float(np.arctan2(y, x))

    def to_twist_frame(self, twist: str) -> "SpinAxis":
        """Map an axis given in the x-twist frame into the frame ``twist``."""
        if twist == "x":
            return self
        x, y, z = self.n
        return SpinAxis((z, -y, x))


X_AXIS = SpinAxis((1.0, 0.0, 0.0))
Y_AXIS = SpinAxis((0.0, 1.0, 0.0))
Z_AXIS = SpinAxis((0.0, 0.0, 1.0))
