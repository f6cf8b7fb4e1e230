"""Uniform grids, trapezoid quadrature, complex tridiagonal algebra and a
Crank-Nicolson stepper for sourced problems ``i du/dt = L u + f(t)``.

The hot loops live in small numba kernels; the dataclass layer on top is
what the rest of the package (and the tests) talk to.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable

import numpy as np
from numba import njit

__all__ = [
    "RadialGrid",
    "ComplexField",
    "TridiagonalOperator",
    "SourcedEvolutionProblem",
    "SingularSystemError",
    "GridMismatchError",
    "build_grid",
    "apply_tridiagonal",
    "solve_tridiagonal",
    "crank_nicolson_step",
    "propagate",
    "quadrature",
    "second_difference",
]

PIVOT_TOL = 1e-14


class SingularSystemError(ArithmeticError):
    """Raised when a tridiagonal pivot collapses below the relative tolerance."""


class GridMismatchError(ValueError):
    pass


@dataclass(frozen=True)
class RadialGrid:
    """Uniform grid ``r_k = r_min + k*dr`` with trapezoid weights.

    ``cartesian`` grids may start at negative coordinates (used for the
    oscillator on a symmetric line); radial grids require ``r_min >= 0``.
    """

    r_min: float
    r_max: float
    dr: float
    n_points: int
    cartesian: bool = False
    points: np.ndarray = field(repr=False, compare=False, default=None)
    weights: np.ndarray = field(repr=False, compare=False, default=None)

    def __post_init__(self):
        if self.n_points < 3:
            raise ValueError("a grid needs at least 3 points")
        if not self.dr > 0:
            raise ValueError("dr must be positive")
        if self.r_min < 0 and not self.cartesian:
            raise ValueError("radial grids need r_min >= 0")
        span = self.r_min + (self.n_points - 1) * self.dr
        if abs(span - self.r_max) > 1e-12 * max(1.0, abs(self.r_max)):
            raise ValueError("r_max inconsistent with r_min, dr, n_points")
        pts = self.r_min + self.dr * np.arange(self.n_points)
        w = np.full(self.n_points, self.dr)
        w[0] = w[-1] = 0.5 * self.dr
        object.__setattr__(self, "points", pts)
        object.__setattr__(self, "weights", w)

    @property
    def r(self) -> np.ndarray:
        return self.points

    def same_as(self, other: "RadialGrid") -> bool:
        return (
            self.n_points == other.n_points
            and self.r_min == other.r_min
            and self.dr == other.dr
        )


def build_grid(r_min: float, r_max: float, dr: float, cartesian: bool = False) -> RadialGrid:
    """Uniform grid from ``r_min`` in steps of ``dr``, last point ``<= r_max``.

    >>> build_grid(0.0, 1.0, 0.5).weights
    array([0.25, 0.5 , 0.25])
    """
    if not dr > 0:
        raise ValueError(f"dr must be positive, got {dr}")
    if not r_max > r_min:
        raise ValueError(f"inverted bounds: r_min={r_min}, r_max={r_max}")
    n = int(np.floor((r_max - r_min) / dr * (1 + 1e-12))) + 1
    return RadialGrid(r_min, r_min + (n - 1) * dr, dr, n, cartesian=cartesian)


@dataclass
class ComplexField:
    grid: RadialGrid
    values: np.ndarray

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=np.complex128)
        if self.values.shape != (self.grid.n_points,):
            raise ValueError(
                f"field has {self.values.shape} samples, grid has {self.grid.n_points}"
            )

    @classmethod
    def zeros(cls, grid: RadialGrid) -> "ComplexField":
        return cls(grid, np.zeros(grid.n_points, np.complex128))

    @classmethod
    def from_function(cls, grid: RadialGrid, fn) -> "ComplexField":
        return cls(grid, fn(grid.points))

    def is_finite(self) -> bool:
        return bool(np.all(np.isfinite(self.values)))

    def copy(self) -> "ComplexField":
        return ComplexField(self.grid, self.values.copy())


@dataclass
class TridiagonalOperator:
    """Row ``i`` acts as ``sub[i]*u[i-1] + diag[i]*u[i] + sup[i]*u[i+1]``.

    ``sub[0]`` and ``sup[-1]`` are ignored.
    """

    sub: np.ndarray
    diag: np.ndarray
    sup: np.ndarray

    def __post_init__(self):
        self.sub = np.asarray(self.sub, dtype=np.complex128)
        self.diag = np.asarray(self.diag, dtype=np.complex128)
        self.sup = np.asarray(self.sup, dtype=np.complex128)
        n = self.diag.size
        if self.sub.size != n or self.sup.size != n:
            raise ValueError("sub, diag and sup must have equal length")

    @property
    def size(self) -> int:
        return self.diag.size

    @classmethod
    def identity(cls, n: int) -> "TridiagonalOperator":
        return cls(np.zeros(n), np.ones(n), np.zeros(n))

    def scaled(self, a: complex, shift: complex = 0.0) -> "TridiagonalOperator":
        """Return ``shift*I + a*self``."""
        return TridiagonalOperator(a * self.sub, shift + a * self.diag, a * self.sup)

    def to_dense(self) -> np.ndarray:
        n = self.size
        m = np.diag(self.diag)
        m[np.arange(1, n), np.arange(n - 1)] = self.sub[1:]
        m[np.arange(n - 1), np.arange(1, n)] = self.sup[:-1]
        return m


def second_difference(grid: RadialGrid) -> TridiagonalOperator:
    """Central-difference d^2/dr^2 on the grid."""
    n = grid.n_points
    h2 = grid.dr**2
    return TridiagonalOperator(np.full(n, 1 / h2), np.full(n, -2 / h2), np.full(n, 1 / h2))


@njit(cache=True)
def _apply(sub, diag, sup, x, out):
    n = x.size
    out[0] = diag[0] * x[0] + sup[0] * x[1]
    for i in range(1, n - 1):
        out[i] = sub[i] * x[i - 1] + diag[i] * x[i] + sup[i] * x[i + 1]
    out[n - 1] = sub[n - 1] * x[n - 2] + diag[n - 1] * x[n - 1]


@njit(cache=True)
def _thomas(sub, diag, sup, rhs, x, tol):
    # returns -1 on success, otherwise the row of the failing pivot
    n = rhs.size
    cp = np.empty(n, np.complex128)
    beta = diag[0]
    if abs(beta) <= tol * (abs(diag[0]) + abs(sup[0])):
        return 0
    cp[0] = sup[0] / beta
    x[0] = rhs[0] / beta
    for i in range(1, n):
        beta = diag[i] - sub[i] * cp[i - 1]
        scale = abs(sub[i]) + abs(diag[i]) + (abs(sup[i]) if i < n - 1 else 0.0)
        if abs(beta) <= tol * scale:
            return i
        cp[i] = sup[i] / beta if i < n - 1 else 0.0
        x[i] = (rhs[i] - sub[i] * x[i - 1]) / beta
    for i in range(n - 2, -1, -1):
        x[i] -= cp[i] * x[i + 1]
    return -1


def apply_tridiagonal(op: TridiagonalOperator, u) -> np.ndarray:
    x = np.asarray(u.values if isinstance(u, ComplexField) else u, dtype=np.complex128)
    if x.size != op.size:
        raise GridMismatchError("operator and vector sizes differ")
    out = np.empty_like(x)
    _apply(op.sub, op.diag, op.sup, x, out)
    return out


def solve_tridiagonal(op: TridiagonalOperator, rhs):
    """Thomas algorithm. Returns a ComplexField when given one, else an array.

    Raises SingularSystemError if a pivot falls below 1e-14 of its row scale.
    """
    is_field = isinstance(rhs, ComplexField)
    b = np.asarray(rhs.values if is_field else rhs, dtype=np.complex128)
    if b.size != op.size:
        raise GridMismatchError("operator and right-hand side sizes differ")
    x = np.empty_like(b)
    bad = _thomas(op.sub, op.diag, op.sup, b, x, PIVOT_TOL)
    if bad >= 0:
        raise SingularSystemError(f"vanishing pivot in row {bad}")
    return ComplexField(rhs.grid, x) if is_field else x


@dataclass
class SourcedEvolutionProblem:
    """``i du/dt = L u + f(t)`` with fixed Dirichlet values at both ends."""

    operator: TridiagonalOperator
    source: Callable[[float], np.ndarray] | None
    initial: ComplexField
    boundary: tuple[complex, complex] = (0.0, 0.0)

    def __post_init__(self):
        v = self.initial.values
        if v[0] != self.boundary[0] or v[-1] != self.boundary[1]:
            raise ValueError("initial field violates the boundary values")
        if self.operator.size != v.size:
            raise GridMismatchError("operator and initial field sizes differ")


def _cn_matrices(op: TridiagonalOperator, dt: float):
    a = 0.5j * dt
    lhs = op.scaled(a, 1.0)
    rhs = op.scaled(-a, 1.0)
    # row replacement for Dirichlet ends
    for m, d in ((lhs, 1.0), (rhs, 0.0)):
        m.diag[0] = m.diag[-1] = d
        m.sup[0] = m.sub[-1] = 0.0
        m.sub[0] = m.sup[-1] = 0.0
    return lhs, rhs


def crank_nicolson_step(problem: SourcedEvolutionProblem, u: ComplexField, t: float, dt: float) -> ComplexField:
    """One Crank-Nicolson step with the source sampled at ``t + dt/2``."""
    if not dt > 0:
        raise ValueError("dt must be positive")
    lhs, rhs_op = _cn_matrices(problem.operator, dt)
    b = apply_tridiagonal(rhs_op, u.values)
    if problem.source is not None:
        f = np.asarray(problem.source(t + 0.5 * dt), dtype=np.complex128)
        b[1:-1] -= 1j * dt * f[1:-1]
    b[0], b[-1] = problem.boundary
    x = solve_tridiagonal(lhs, b)
    x[0], x[-1] = problem.boundary
    return ComplexField(u.grid, x)


@njit(cache=True)
def _factor(sub, diag, sup, tol):
    n = diag.size
    cp = np.zeros(n, np.complex128)
    inv = np.zeros(n, np.complex128)
    beta = diag[0]
    if abs(beta) <= tol:
        return cp, inv, 0
    inv[0] = 1.0 / beta
    cp[0] = sup[0] * inv[0]
    for i in range(1, n):
        beta = diag[i] - sub[i] * cp[i - 1]
        if abs(beta) <= tol * (abs(diag[i]) + abs(sub[i]) + 1e-300):
            return cp, inv, i
        inv[i] = 1.0 / beta
        cp[i] = sup[i] * inv[i]
    return cp, inv, -1


@njit(cache=True)
def _solve_factored(sub, cp, inv, b, x):
    n = b.size
    x[0] = b[0] * inv[0]
    for i in range(1, n):
        x[i] = (b[i] - sub[i] * x[i - 1]) * inv[i]
    for i in range(n - 2, -1, -1):
        x[i] -= cp[i] * x[i + 1]


@njit(cache=True)
def _cn_loop(lsub, lcp, linv, rsub, rdiag, rsup, u, src, bc0, bc1, dt, nsteps):
    n = u.size
    b = np.empty(n, np.complex128)
    sourced = src.shape[0] == nsteps
    for s in range(nsteps):
        _apply(rsub, rdiag, rsup, u, b)
        if sourced:
            for i in range(1, n - 1):
                b[i] -= 1j * dt * src[s, i]
        b[0] = bc0
        b[n - 1] = bc1
        _solve_factored(lsub, lcp, linv, b, u)
        u[0] = bc0
        u[n - 1] = bc1


def propagate(problem: SourcedEvolutionProblem, t0: float, dt: float, nsteps: int,
              source_samples: np.ndarray | None = None) -> ComplexField:
    """Repeated Crank-Nicolson steps with a single LU factorization.

    ``source_samples`` may hold the midpoint source for every step as an
    ``(nsteps, n)`` array; otherwise ``problem.source`` is sampled.
    """
    lhs, rhs_op = _cn_matrices(problem.operator, dt)
    cp, inv, bad = _factor(lhs.sub, lhs.diag, lhs.sup, PIVOT_TOL)
    if bad >= 0:
        raise SingularSystemError(f"vanishing pivot in row {bad}")
    n = problem.operator.size
    if source_samples is None:
        if problem.source is None:
            source_samples = np.zeros((0, n), np.complex128)
        else:
            ts = t0 + dt * (np.arange(nsteps) + 0.5)
            source_samples = np.array([problem.source(t) for t in ts], dtype=np.complex128)
    u = problem.initial.values.copy()
    _cn_loop(lhs.sub, cp, inv, rhs_op.sub, rhs_op.diag, rhs_op.sup, u,
             np.ascontiguousarray(source_samples, dtype=np.complex128),
             complex(problem.boundary[0]), complex(problem.boundary[1]), dt, nsteps)
    return ComplexField(problem.initial.grid, u)


def quadrature(f: ComplexField, weight_field: ComplexField | None = None) -> complex:
    """Trapezoid sum ``sum_k w_k f_k g_k``."""
    vals = f.values
    if weight_field is not None:
        if not f.grid.same_as(weight_field.grid):
            raise GridMismatchError("fields live on different grids")
        vals = vals * weight_field.values
    return complex(np.dot(f.grid.weights, vals))
