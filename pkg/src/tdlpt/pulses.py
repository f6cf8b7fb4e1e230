"""Temporal field profiles g(t) and the coupling amplitude lambda."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy import constants

__all__ = ["PulseProfile", "field_amplitude_from_intensity"]

KINDS = ("sin2", "adiabatic", "table", "zero", "constant")

_AU_FIELD = constants.physical_constants["atomic unit of electric field"][0]


def field_amplitude_from_intensity(I0: float, unit: str = "W/cm2") -> float:
    """Peak field amplitude E0 = sqrt(2 I0 / (eps0 c)) in atomic units.

    ``unit`` is "W/cm2" (laboratory) or "au", where the atomic intensity
    unit is chosen so that I0 = E0**2.
    """
    if I0 < 0:
        raise ValueError("intensity must be non-negative")
    if unit == "au":
        return float(np.sqrt(I0))
    if unit != "W/cm2":
        raise ValueError(f"unknown intensity unit {unit!r}")
    e_si = np.sqrt(2 * I0 * 1e4 / (constants.epsilon_0 * constants.c))
    return float(e_si / _AU_FIELD)


@dataclass(frozen=True)
class PulseProfile:
    """A driving profile g(t) multiplied by the coupling ``lam``.

    kinds
        ``sin2``: sin^2(wt/2N) cos(wt) on [0, 2N pi/w], zero elsewhere.
        ``adiabatic``: cos(wt) switched on in the infinite past.
        ``constant``: g = 1 for t >= 0.
        ``table``: linear interpolation of (t, g) samples, zero outside.
        ``zero``: g = 0.
    """

    omega: float = 0.056
    n_cycles: int = 5
    lam: float = 0.03
    kind: str = "sin2"
    table_t: tuple = field(default=(), repr=False)
    table_g: tuple = field(default=(), repr=False)

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ValueError(f"unknown pulse kind {self.kind!r}")
        if self.kind in ("sin2", "adiabatic") and not self.omega > 0:
            raise ValueError("omega must be positive")
        if self.kind == "sin2" and self.n_cycles < 1:
            raise ValueError("n_cycles must be >= 1")
        if self.kind == "table" and len(self.table_t) != len(self.table_g):
            raise ValueError("table times and values differ in length")

    @classmethod
    def sin2(cls, omega=0.056, n_cycles=5, lam=0.03):
        return cls(omega, int(n_cycles), lam, "sin2")

    @classmethod
    def from_intensity(cls, I0, omega=0.056, n_cycles=5, unit="W/cm2"):
        return cls.sin2(omega, n_cycles, field_amplitude_from_intensity(I0, unit))

    @property
    def duration(self) -> float:
        """Final time T_f of a finite pulse (inf for adiabatic/constant)."""
        if self.kind == "sin2":
            return 2 * self.n_cycles * np.pi / self.omega
        if self.kind == "table":
            return float(self.table_t[-1]) if self.table_t else 0.0
        return np.inf

    @property
    def period(self) -> float:
        return 2 * np.pi / self.omega

    @property
    def peak_time(self) -> float:
        return self.n_cycles * np.pi / self.omega

    def g(self, t):
        t = np.asarray(t, dtype=float)
        if self.kind == "zero":
            return np.zeros_like(t)
        if self.kind == "constant":
            return np.where(t >= 0, 1.0, 0.0)
        if self.kind == "adiabatic":
            return np.cos(self.omega * t)
        if self.kind == "table":
            return np.interp(t, self.table_t, self.table_g, left=0.0, right=0.0)
        w, N = self.omega, self.n_cycles
        val = np.sin(w * t / (2 * N)) ** 2 * np.cos(w * t)
        return np.where((t >= 0) & (t <= self.duration), val, 0.0)

    def __call__(self, t):
        return self.g(t)

    def field(self, t):
        """lam * g(t), the physical field amplitude."""
        return self.lam * self.g(t)

    def scaled(self, c: float) -> "PulseProfile":
        return PulseProfile(self.omega, self.n_cycles, self.lam * c, self.kind,
                            self.table_t, self.table_g)
