"""Order-by-order machinery of the logarithmic phase expansion.

With psi = exp(Phi) and Phi = sum_n lam**n Phi_n, each correction obeys

    i dPhi_n/dt = L Phi_n + Q_n,   L = -1/2 (Delta - 2 grad(phi0).grad),

with Q_1 = V_int and Q_n = -1/2 sum_k grad(Phi_{n-k}).grad(Phi_k).  This
module holds the ground-state data, the pseudopotentials, expectation
values against psi0**2, energy-shift series and two self-consistency
checks (the expectation-value law and the gauge-rotation identity).
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np
from scipy.linalg import eigh_tridiagonal

from .numerics import (
    ComplexField,
    GridMismatchError,
    RadialGrid,
    SourcedEvolutionProblem,
    TridiagonalOperator,
    propagate,
    quadrature,
)

__all__ = [
    "GroundState",
    "PseudopotentialSeries",
    "ShiftSeries",
    "pseudopotential",
    "instantaneous_shift",
    "dynamic_shift",
    "expectation_evolution_residual",
    "gauge_rotation_identity_check",
    "norm_defect",
]


@dataclass
class GroundState:
    """Unperturbed ground state psi0 = exp(-phi0) with energy E0.

    ``kind`` is "line" (1-D Cartesian) or "radial" (3-D, spherically
    symmetric, functions of r only).  ``measure`` is psi0**2 times the
    volume Jacobian so that ``quadrature(f, measure)`` is <f>.
    """

    grid: RadialGrid
    psi0: ComplexField
    phi0: ComplexField
    E0: float
    potential: np.ndarray
    kind: str = "line"

    def __post_init__(self):
        if self.kind not in ("line", "radial"):
            raise ValueError("kind must be 'line' or 'radial'")
        if not self.grid.same_as(self.psi0.grid) or not self.grid.same_as(self.phi0.grid):
            raise GridMismatchError("ground-state fields on a foreign grid")

    @property
    def jacobian(self) -> np.ndarray:
        r = self.grid.points
        return 4 * np.pi * r**2 if self.kind == "radial" else np.ones_like(r)

    @property
    def measure(self) -> ComplexField:
        return ComplexField(self.grid, self.psi0.values.real**2 * self.jacobian)

    @property
    def reduced(self) -> np.ndarray:
        """psi0 times sqrt(Jacobian): r*psi0*sqrt(4 pi) for radial states."""
        return self.psi0.values.real * np.sqrt(self.jacobian)

    def norm(self) -> float:
        return quadrature(ComplexField(self.grid, np.ones(self.grid.n_points)), self.measure).real

    def riccati_residual(self) -> np.ndarray:
        """Delta phi0 - |grad phi0|^2 - 2 (E0 - V) on interior points."""
        h = self.grid.dr
        p = self.phi0.values.real
        d1 = (p[2:] - p[:-2]) / (2 * h)
        d2 = (p[2:] - 2 * p[1:-1] + p[:-2]) / h**2
        lap = d2
        if self.kind == "radial":
            lap = d2 + 2 * d1 / self.grid.points[1:-1]
        return lap - d1**2 - 2 * (self.E0 - self.potential[1:-1])

    @classmethod
    def oscillator(cls, grid: RadialGrid) -> "GroundState":
        x = grid.points
        phi0 = 0.5 * x**2 + 0.25 * np.log(np.pi)
        return cls(grid, ComplexField(grid, np.exp(-phi0)), ComplexField(grid, phi0),
                   0.5, 0.5 * x**2, "line")

    @classmethod
    def hydrogen(cls, grid: RadialGrid) -> "GroundState":
        r = grid.points
        phi0 = r + 0.5 * np.log(np.pi)
        return cls(grid, ComplexField(grid, np.exp(-phi0)), ComplexField(grid, phi0),
                   -0.5, -1.0 / r, "radial")

    @classmethod
    def discrete(cls, grid: RadialGrid, potential: np.ndarray, kind: str = "line") -> "GroundState":
        """Lowest eigenpair of the central-difference Hamiltonian, Dirichlet ends.

        For ``kind="radial"`` the reduced function u = r psi0 sqrt(4 pi) is
        diagonalised.  Normalisation uses the trapezoid weights.
        """
        h = grid.dr
        v = np.asarray(potential, float)[1:-1]
        n_in = grid.n_points - 2
        e, vec = eigh_tridiagonal(1 / h**2 + v, np.full(n_in - 1, -0.5 / h**2),
                                  select="i", select_range=(0, 0))
        u = np.zeros(grid.n_points)
        u[1:-1] = vec[:, 0] * np.sign(vec[n_in // 2, 0])
        u /= np.sqrt(np.dot(grid.weights, u**2))
        r = grid.points
        psi = u.copy()
        if kind == "radial":
            psi[1:-1] = u[1:-1] / (r[1:-1] * np.sqrt(4 * np.pi))
        phi = np.empty_like(psi)
        phi[1:-1] = -np.log(psi[1:-1])
        # ends carry the Dirichlet zero of the eigenvector; extend phi0 linearly
        phi[0] = 2 * phi[1] - phi[2]
        phi[-1] = 2 * phi[-2] - phi[-3]
        psi_f = ComplexField(grid, psi)
        return cls(grid, psi_f, ComplexField(grid, phi), float(e[0]),
                   np.asarray(potential, float), kind)


@dataclass
class PseudopotentialSeries:
    order: int
    evaluator: Callable[[float], ComplexField]

    def __call__(self, t: float) -> ComplexField:
        return self.evaluator(t)


def _dot(a, b):
    if isinstance(a, (tuple, list)):
        return sum(np.asarray(x) * np.asarray(y) for x, y in zip(a, b))
    return np.asarray(a) * np.asarray(b)


def pseudopotential(n: int, v_int=None, gradients: Sequence = ()):
    """Q_n at one instant.

    ``gradients[k-1]`` is grad Phi_k, either an array (1-D) or a tuple of
    component arrays.  Q_1 is the interaction potential itself.
    """
    if n < 1:
        raise ValueError("pseudopotentials start at order 1")
    if n == 1:
        if v_int is None:
            raise ValueError("Q_1 needs the interaction potential")
        return np.asarray(v_int)
    if len(gradients) < n - 1:
        raise ValueError(f"Q_{n} needs gradients of orders 1..{n - 1}")
    acc = 0.0
    for k in range(1, n):
        acc = acc + _dot(gradients[n - k - 1], gradients[k - 1])
    return -0.5 * acc


@dataclass
class ShiftSeries:
    """Instantaneous shifts E_n(t) sampled on a strictly increasing mesh."""

    times: np.ndarray
    values: np.ndarray
    order: int = 2

    def __post_init__(self):
        self.times = np.asarray(self.times, float)
        self.values = np.asarray(self.values, np.complex128)
        if self.times.shape != self.values.shape:
            raise ValueError("times and values differ in shape")
        if self.times.size > 1 and np.any(np.diff(self.times) <= 0):
            raise ValueError("times must be strictly increasing")
        if not np.all(np.isfinite(self.values)):
            raise ValueError("non-finite energy shift")


def instantaneous_shift(Q_n_at_t: ComplexField, gs: GroundState, measure: ComplexField | None = None) -> complex:
    """<Q_n(., t)> against psi0**2 with the volume Jacobian folded into ``measure``."""
    return quadrature(Q_n_at_t, gs.measure if measure is None else measure)


def _interp_c(t, ts, vs):
    return np.interp(t, ts, vs.real) + 1j * np.interp(t, ts, vs.imag)


def dynamic_shift(series: ShiftSeries, t0: float, T: float) -> complex:
    """Window mean (1/T) * integral of E_n over [t0 - T/2, t0 + T/2].

    Trapezoid rule on the stored samples; the partial intervals at the
    window edges use linear interpolation.
    """
    if not T > 0:
        raise ValueError("window length must be positive")
    ts, vs = series.times, series.values
    a, b = t0 - 0.5 * T, t0 + 0.5 * T
    slack = 1e-9 * max(1.0, abs(ts[-1]))
    if a < ts[0] - slack or b > ts[-1] + slack:
        raise ValueError(f"window [{a}, {b}] outside series span [{ts[0]}, {ts[-1]}]")
    a, b = max(a, ts[0]), min(b, ts[-1])
    inside = (ts > a) & (ts < b)
    tt = np.concatenate(([a], ts[inside], [b]))
    vv = np.concatenate(([_interp_c(a, ts, vs)], vs[inside], [_interp_c(b, ts, vs)]))
    return complex(np.trapezoid(vv, tt) / T)


def expectation_evolution_residual(phi_n_series, Q_n_series, gs: GroundState | None = None,
                                   measure: ComplexField | None = None, times=None) -> float:
    """max_k | i d<Phi_n>/dt - <Q_n> | over interior time samples.

    The series are either 2-D (time x grid), reduced here against
    ``measure`` (default ``gs.measure``), or 1-D arrays of expectation
    values that were already reduced.  The derivative is a centred
    difference on ``times``.
    """
    P = np.asarray(phi_n_series, np.complex128)
    Q = np.asarray(Q_n_series, np.complex128)
    if P.shape[0] < 3:
        raise ValueError("need at least three time samples")
    if times is None:
        raise ValueError("times are required")
    t = np.asarray(times, float)
    if P.ndim == 2:
        m = measure if measure is not None else gs.measure
        w = m.grid.weights * m.values
        P = P @ w
        Q = Q @ w
    dP = (P[2:] - P[:-2]) / (t[2:] - t[:-2])
    return float(np.max(np.abs(1j * dP - Q[1:-1])))


def _rotated_generator(gs: GroundState, ell: int) -> TridiagonalOperator:
    # L acting on F where Phi = Y_ell * F (radial) or Phi = F (line)
    h = gs.grid.dr
    r = gs.grid.points
    p = gs.phi0.values.real
    dphi = np.gradient(p, h)
    first = dphi.copy()                  # coefficient of F'
    zero = np.zeros_like(r)
    if gs.kind == "radial":
        first = first - 1.0 / r
        zero = ell * (ell + 1) / (2 * r**2)
    n = r.size
    sub = -0.5 / h**2 - first / (2 * h)
    sup = -0.5 / h**2 + first / (2 * h)
    diag = np.full(n, 1.0 / h**2) + zero
    return TridiagonalOperator(sub, diag, sup)


def _shifted_hamiltonian(gs: GroundState, ell: int) -> TridiagonalOperator:
    h = gs.grid.dr
    r = gs.grid.points
    v = gs.potential - gs.E0
    if gs.kind == "radial":
        v = v + ell * (ell + 1) / (2 * r**2)
    n = r.size
    off = np.full(n, -0.5 / h**2)
    return TridiagonalOperator(off, 1.0 / h**2 + v, off)


def gauge_rotation_identity_check(gs: GroundState, test_field: ComplexField, t: float,
                                  n_steps: int = 1000, ell: int = 0,
                                  weighted: bool = True, return_fields: bool = False):
    """Relative L2 gap between the two routes to exp(-i t L) F.

    (a) Crank-Nicolson directly on the rotated generator L.
    (b) exp(phi0) * [Crank-Nicolson under H0 - E0 of exp(-phi0) F].

    For radial states the test field is the radial factor of Y_ell * F and
    route (b) works with the reduced function r exp(-phi0) F.  The gap is
    measured where psi0 > 1e-8, away from the two boundary points, in the
    psi0**2-weighted L2 norm on which the rotated semigroup acts (set
    ``weighted=False`` for the plain norm of F).
    """
    grid = gs.grid
    dt = t / n_steps
    F = test_field.values
    r = grid.points
    jac = r if gs.kind == "radial" else np.ones_like(r)
    e_m = np.exp(-gs.phi0.values.real)

    pa = SourcedEvolutionProblem(_rotated_generator(gs, ell), None, ComplexField(grid, F),
                                 (F[0], F[-1]))
    Fa = propagate(pa, 0.0, dt, n_steps).values

    u0 = jac * e_m * F
    u0[0] = u0[-1] = 0.0
    pb = SourcedEvolutionProblem(_shifted_hamiltonian(gs, ell), None, ComplexField(grid, u0))
    ub = propagate(pb, 0.0, dt, n_steps).values

    mask = gs.psi0.values.real > 1e-8
    mask[0] = mask[-1] = False
    Fb = np.zeros_like(Fa)
    Fb[mask] = ub[mask] / (jac[mask] * e_m[mask])
    w = grid.weights[mask]
    if weighted:
        w = w * (gs.psi0.values.real[mask] ** 2) * gs.jacobian[mask]
    num = np.sqrt(np.dot(w, np.abs(Fa[mask] - Fb[mask]) ** 2))
    den = np.sqrt(np.dot(w, np.abs(Fa[mask]) ** 2))
    dev = float(num / den)
    if return_fields:
        return dev, Fa, Fb, mask
    return dev


def norm_defect(phases: Sequence[np.ndarray], lam: float, gs: GroundState) -> float:
    """| ||exp(sum_n lam^n Phi_n)||^2 - 1 | for a phase series truncated at len-1.

    ``phases[0]`` is the full zeroth-order phase Phi_0 = -phi0 - i E0 t.
    """
    log_psi = sum(lam**n * np.asarray(p, np.complex128) for n, p in enumerate(phases))
    dens = np.abs(np.exp(log_psi)) ** 2 * gs.jacobian
    return float(abs(np.dot(gs.grid.weights, dens) - 1.0))
