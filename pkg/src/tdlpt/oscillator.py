"""Driven harmonic oscillator: closed phase corrections and the exact oracle.

For H0 = -1/2 d^2/dx^2 + x^2/2 and V_int = g(t) x the rotated generator
satisfies L x = x, so

    Phi_1 = c1(t) x,   c1(t) = -i int_0^t g(s) exp(-i(t-s)) ds,
    Phi_2(t) = (i/2) int_0^t c1(s)^2 ds,

and Phi_2 carries no x dependence.  Every higher pseudopotential
vanishes, so exp(Phi_0 + lam Phi_1 + lam^2 Phi_2) is the exact state.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from numba import njit
from scipy.integrate import cumulative_simpson, simpson

from .hierarchy import ShiftSeries, dynamic_shift, pseudopotential
from .numerics import ComplexField, RadialGrid
from .pulses import PulseProfile

__all__ = [
    "HOCorrections",
    "ho_corrections",
    "ho_phi1",
    "ho_phi2",
    "ho_tdlpt_state",
    "classical_trajectory",
    "ho_exact_solution",
    "ho_truncation_check",
    "adiabatic_W",
    "ho_ac_shift",
    "sum_over_states_shift",
    "ho_sum_over_states",
]

RESONANCE_GUARD = 1e-6


@dataclass
class HOCorrections:
    times: np.ndarray
    c1: np.ndarray
    c2: np.ndarray
    pulse: PulseProfile

    def at(self, t: float) -> tuple[complex, complex]:
        k = int(np.argmin(np.abs(self.times - t)))
        return complex(self.c1[k]), complex(self.c2[k])


def _mesh(t: float, dt: float) -> np.ndarray:
    n = max(2, int(np.ceil(t / dt)))
    n += n % 2
    return np.linspace(0.0, t, n + 1)


def _csimpson(y, x):
    # cumulative_simpson casts complex input to real, so split it
    kw = dict(x=x, initial=0.0)
    return cumulative_simpson(y.real, **kw) + 1j * cumulative_simpson(y.imag, **kw)


def adiabatic_W(omega: float, t):
    """W(t) = (i cos wt + w sin wt) / (w^2 - 1)."""
    return (1j * np.cos(omega * t) + omega * np.sin(omega * t)) / (omega**2 - 1)


def ho_phi1(pulse: PulseProfile, t: float, dt: float = 1e-3) -> complex:
    """c1(t) by composite Simpson with step <= dt (closed form if adiabatic)."""
    if pulse.kind == "adiabatic":
        return complex(-1j * adiabatic_W(pulse.omega, t))
    if t <= 0:
        return 0j
    s = _mesh(t, dt)
    return complex(-1j * simpson(pulse.g(s) * np.exp(-1j * (t - s)), x=s))


def ho_corrections(pulse: PulseProfile, t_end: float, dt: float = 1e-3) -> HOCorrections:
    """c1 and Phi_2 on a uniform mesh of [0, t_end].

    Inner integral I(s) = int_0^s exp(i tau) g(tau) dtau is accumulated
    once; Phi_2 = -(i/2) int exp(-2is) I(s)^2 ds reuses it, so the cost
    is linear in the number of steps.
    """
    if pulse.kind == "adiabatic":
        raise ValueError("adiabatic driving has no finite start; use adiabatic_W")
    s = _mesh(t_end, dt)
    inner = _csimpson(np.exp(1j * s) * pulse.g(s), s)
    c1 = -1j * np.exp(-1j * s) * inner
    c2 = -0.5j * _csimpson(np.exp(-2j * s) * inner**2, s)
    return HOCorrections(s, c1, c2, pulse)


def ho_phi2(pulse: PulseProfile, t: float, dt: float = 1e-3) -> complex:
    if t <= 0:
        return 0j
    return complex(ho_corrections(pulse, t, dt).c2[-1])


def ho_tdlpt_state(x: np.ndarray, t: float, c1: complex, c2: complex, lam: float) -> np.ndarray:
    """exp(Phi_0 + lam Phi_1 + lam^2 Phi_2) with Phi_0 = -x^2/2 - ln(pi)/4 - i t/2."""
    phase0 = -0.5 * x**2 - 0.25 * np.log(np.pi) - 0.5j * t
    return np.exp(phase0 + lam * c1 * x + lam**2 * c2)


@njit(cache=True)
def _rk4(g_half, h, n):
    y = np.zeros((n + 1, 3))
    k = np.empty((4, 3))
    for j in range(n):
        q, p, c = y[j, 0], y[j, 1], y[j, 2]
        for stage in range(4):
            if stage == 0:
                qq, pp, gl = q, p, g_half[2 * j]
            elif stage == 1:
                qq, pp, gl = q + 0.5 * h * k[0, 0], p + 0.5 * h * k[0, 1], g_half[2 * j + 1]
            elif stage == 2:
                qq, pp, gl = q + 0.5 * h * k[1, 0], p + 0.5 * h * k[1, 1], g_half[2 * j + 1]
            else:
                qq, pp, gl = q + h * k[2, 0], p + h * k[2, 1], g_half[2 * j + 2]
            k[stage, 0] = pp
            k[stage, 1] = -qq - gl
            k[stage, 2] = 0.5 * pp * pp - 0.5 * qq * qq - gl * qq
        for m in range(3):
            y[j + 1, m] = y[j, m] + h / 6 * (k[0, m] + 2 * k[1, m] + 2 * k[2, m] + k[3, m])
    return y


def classical_trajectory(pulse: PulseProfile, lam: float, t: float, dt: float = 1e-3):
    """RK4 for q' = p, p' = -q - lam g, gamma' = -1/2 + p^2/2 - q^2/2 - lam g q.

    Returns the mesh and arrays q, p, gamma starting from zero.
    """
    n = max(1, int(np.ceil(t / dt)))
    h = t / n
    ts = h * np.arange(n + 1)
    g_half = lam * pulse.g(0.5 * h * np.arange(2 * n + 1))
    y = _rk4(np.asarray(g_half, float), h, n)
    # the -E0 t part of gamma is added exactly rather than integrated
    return ts, y[:, 0], y[:, 1], y[:, 2] - 0.5 * ts


def ho_exact_solution(pulse: PulseProfile, lam: float, x_grid: RadialGrid, t: float,
                      dt: float = 1e-3) -> ComplexField:
    """Coherent-state solution psi0(x - q) exp(i p (x - q) + i gamma)."""
    x = x_grid.points
    if t <= 0:
        q = p = gam = 0.0
    else:
        _, qs, ps, gs = classical_trajectory(pulse, lam, t, dt)
        q, p, gam = qs[-1], ps[-1], gs[-1]
    psi = np.pi**-0.25 * np.exp(-0.5 * (x - q) ** 2 + 1j * p * (x - q) + 1j * gam)
    return ComplexField(x_grid, psi)


def ho_truncation_check(pulse: PulseProfile, t_samples, x_grid: RadialGrid, dt: float = 1e-3,
                        perturbation: float = 0.0) -> float:
    """max |Q_3| over grid and samples, Q_3 = -grad Phi_1 . grad Phi_2.

    Phi_2 is laid out on the grid as a field before differentiation;
    ``perturbation`` adds eps * x^2 to it to probe the assembler.
    """
    x = x_grid.points
    t_samples = np.atleast_1d(np.asarray(t_samples, float))
    corr = ho_corrections(pulse, float(t_samples.max()), dt)
    worst = 0.0
    for t in t_samples:
        c1 = np.interp(t, corr.times, corr.c1.real) + 1j * np.interp(t, corr.times, corr.c1.imag)
        c2 = np.interp(t, corr.times, corr.c2.real) + 1j * np.interp(t, corr.times, corr.c2.imag)
        phi1 = c1 * x
        phi2 = np.full(x.shape, c2, dtype=np.complex128) + perturbation * x**2
        grads = [np.gradient(phi1, x_grid.dr), np.gradient(phi2, x_grid.dr)]
        q3 = pseudopotential(3, gradients=grads)
        worst = max(worst, float(np.max(np.abs(q3))))
    return worst


def ho_ac_shift(omega: float, t0: float = 0.0, n_samples: int = 256) -> float:
    """One-period mean of E_2(t) = W(t)^2 / 2 for adiabatic cos(wt) driving.

    The closed form is 1/(4(w^2 - 1)).
    """
    if abs(omega - 1.0) < RESONANCE_GUARD:
        raise ValueError(f"omega={omega} sits on the oscillator resonance")
    T = 2 * np.pi / omega
    ts = np.linspace(t0 - T / 2, t0 + T / 2, n_samples + 1)
    series = ShiftSeries(ts, 0.5 * adiabatic_W(omega, ts) ** 2)
    return dynamic_shift(series, t0, T).real


def sum_over_states_shift(omega, dipoles_sq, gaps):
    """-(1/2) sum_k |<k|x|0>|^2 D_k / (D_k^2 - w^2) for cos(wt) driving.

    Plain arithmetic, so sympy symbols pass straight through.
    """
    total = 0
    for d2, gap in zip(dipoles_sq, gaps):
        total = total - d2 * gap / (2 * (gap**2 - omega**2))
    return total


def ho_sum_over_states(omega):
    # only |1> couples to the ground state: <1|x|0>^2 = 1/2, gap 1
    import sympy

    if isinstance(omega, sympy.Basic):
        return sum_over_states_shift(omega, [sympy.Rational(1, 2)], [1])
    return float(sum_over_states_shift(omega, [0.5], [1.0]))
