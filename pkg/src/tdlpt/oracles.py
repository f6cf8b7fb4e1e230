"""Independent reference solvers used only to validate the main code paths.

None of these reuse the propagation kernels of the hierarchy: operators are
assembled separately (scipy.sparse / dense algebra) so that agreement is
evidence rather than tautology.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp
from numba import njit
from scipy.integrate import simpson
from scipy.interpolate import CubicSpline
from scipy.linalg import eigh, eigh_tridiagonal
from scipy.sparse.linalg import splu

from .numerics import RadialGrid
from .pulses import PulseProfile

__all__ = [
    "NormDriftError",
    "DysonResult",
    "dyson_first_order",
    "PartialWaveState",
    "full_tdse_dipole",
    "nested_quadrature_phi2",
    "brute_force_q2_expectation",
]


class NormDriftError(ArithmeticError):
    pass


@dataclass
class DysonResult:
    times: np.ndarray
    chi: np.ndarray

    def as_phase_channel(self, E0: float = -0.5) -> np.ndarray:
        """Undo the normalisation and ground-state phase: sqrt(3/4) e^{i E0 t} chi."""
        return np.sqrt(0.75) * np.exp(1j * E0 * self.times)[:, None] * self.chi


def dyson_first_order(grid: RadialGrid, pulse: PulseProfile, dt: float = 1e-3,
                      store_stride: int = 100, E0: float = -0.5) -> DysonResult:
    """Order-lam wavefunction in the l=1 partial wave.

    i dchi/dt = H_1 chi - g(t) sqrt(4/3) r^2 e^{-r} e^{-i E0 t}, chi(0) = 0,
    with the unshifted p-wave Hamiltonian, Crank-Nicolson in time and a
    sparse LU factorisation.
    """
    r = grid.points[1:-1]
    h = grid.dr
    n = r.size
    H = sp.diags([np.full(n - 1, -0.5 / h**2), 1 / h**2 - 1 / r + 1 / r**2,
                  np.full(n - 1, -0.5 / h**2)], [-1, 0, 1], format="csc")
    eye = sp.identity(n, format="csc", dtype=complex)
    A = splu((eye + 0.5j * dt * H).tocsc())
    B = (eye - 0.5j * dt * H).tocsr()
    shape = np.sqrt(4 / 3) * r**2 * np.exp(-r)
    nsteps = max(1, int(np.ceil(pulse.duration / dt - 1e-6)))
    chi = np.zeros(n, complex)
    out_t = [0.0]
    out = [np.zeros(grid.n_points, complex)]
    for s in range(nsteps):
        tm = (s + 0.5) * dt
        src = -float(pulse.g(tm)) * np.exp(-1j * E0 * tm) * shape
        chi = A.solve(B @ chi - 1j * dt * src)
        if (s + 1) % store_stride == 0 or s == nsteps - 1:
            full = np.zeros(grid.n_points, complex)
            full[1:-1] = chi
            out.append(full)
            out_t.append((s + 1) * dt)
    return DysonResult(np.array(out_t), np.array(out))


@dataclass
class PartialWaveState:
    channels: np.ndarray      # (L_max + 1, n) reduced radial functions
    L_max: int

    def norm(self, dr: float) -> float:
        return float(np.sum(np.abs(self.channels) ** 2) * dr)


def _coupling(L_max: int) -> np.ndarray:
    # <l+1, 0| cos(theta) |l, 0>
    return np.array([(l + 1) / np.sqrt((2 * l + 1) * (2 * l + 3)) for l in range(L_max)])


@njit(cache=True)
def _tri_factor(ad, ao):
    n = ad.size
    cp = np.zeros(n, np.complex128)
    inv = np.zeros(n, np.complex128)
    inv[0] = 1 / ad[0]
    cp[0] = ao * inv[0]
    for i in range(1, n):
        inv[i] = 1 / (ad[i] - ao * cp[i - 1])
        cp[i] = ao * inv[i]
    return cp, inv


@njit(cache=True)
def _tdse_loop(r, dr, dt, g_mid, lam, u, U, mu, cl, stride, dip, norm):
    nl, n = u.shape
    a = 0.5j * dt
    lo = -0.5 / dr**2
    cps = np.zeros((nl, n), np.complex128)
    invs = np.zeros((nl, n), np.complex128)
    bd = np.zeros((nl, n), np.complex128)
    for l in range(nl):
        di = 1.0 / dr**2 - 1.0 / r + l * (l + 1) / (2 * r**2)
        cp, inv = _tri_factor(1 + a * di, a * lo + 0j)
        cps[l] = cp
        invs[l] = inv
        bd[l] = 1 - a * di
    bo = -a * lo
    ao = a * lo
    rhs = np.zeros(n, np.complex128)
    w = np.zeros(nl, np.complex128)
    k = 0
    nsteps = g_mid.size
    for s in range(nsteps + 1):
        if s % stride == 0 or s == nsteps:
            acc = 0.0
            nn = 0.0
            for l in range(nl - 1):
                for i in range(n):
                    acc += 2 * (np.conj(u[l, i]) * u[l + 1, i]).real * cl[l] * r[i] * dr
            for l in range(nl):
                for i in range(n):
                    nn += (u[l, i].real ** 2 + u[l, i].imag ** 2) * dr
            dip[k] = -acc
            norm[k] = nn
            k += 1
            if not abs(nn - norm[0]) <= 1e-4:      # also trips on nan
                return k
        if s == nsteps:
            break
        ph = 0.5 * dt * lam * g_mid[s]
        for half in range(2):
            if half == 1:
                for l in range(nl):
                    rhs[0] = bd[l, 0] * u[l, 0] + bo * u[l, 1]
                    for i in range(1, n - 1):
                        rhs[i] = bo * u[l, i - 1] + bd[l, i] * u[l, i] + bo * u[l, i + 1]
                    rhs[n - 1] = bo * u[l, n - 2] + bd[l, n - 1] * u[l, n - 1]
                    rhs[0] = rhs[0] * invs[l, 0]
                    for i in range(1, n):
                        rhs[i] = (rhs[i] - ao * rhs[i - 1]) * invs[l, i]
                    for i in range(n - 2, -1, -1):
                        rhs[i] -= cps[l, i] * rhs[i + 1]
                    u[l, :] = rhs
            # exp(+i dt/2 lam g r C) applied in the eigenbasis of C
            for i in range(n):
                for j in range(nl):
                    acc2 = 0j
                    for l in range(nl):
                        acc2 += U[l, j] * u[l, i]
                    w[j] = acc2 * np.exp(1j * ph * r[i] * mu[j])
                for l in range(nl):
                    acc2 = 0j
                    for j in range(nl):
                        acc2 += U[l, j] * w[j]
                    u[l, i] = acc2
    return -1


def full_tdse_dipole(grid: RadialGrid, pulse: PulseProfile, lam: float | None = None,
                     L_max: int = 4, dt: float = 0.01, store_stride: int = 10,
                     initial: str = "discrete"):
    """Partial-wave TDSE for H0 - lam g(t) z; returns (times, d, norm).

    Strang splitting: half coupling step, Crank-Nicolson atomic step per
    channel, half coupling step.  The dipole coupling matrix C (m = 0) is
    diagonalised once so exp(i a r C) is applied exactly at each radius.
    The initial state is the 1s eigenvector of the discrete l=0 operator
    (``initial="discrete"``) or 2 r e^{-r}.
    """
    if L_max < 2:
        raise ValueError("L_max must be >= 2")
    lam = pulse.lam if lam is None else lam
    r = grid.points[1:-1]
    dr = grid.dr
    if initial == "discrete":
        _, v = eigh_tridiagonal(1 / dr**2 - 1 / r, np.full(r.size - 1, -0.5 / dr**2),
                                select="i", select_range=(0, 0))
        u0 = v[:, 0] / np.sqrt(dr)
        u0 *= np.sign(u0[r.size // 2])
    elif initial == "analytic":
        u0 = 2 * r * np.exp(-r)
    else:
        raise ValueError(f"unknown initial state {initial!r}")
    cl = _coupling(L_max)
    C = np.diag(cl, 1) + np.diag(cl, -1)
    mu, U = eigh(C)
    nsteps = max(1, int(np.ceil(pulse.duration / dt - 1e-6)))
    g_mid = pulse.g(dt * (np.arange(nsteps) + 0.5)).astype(float)
    u = np.zeros((L_max + 1, r.size), np.complex128)
    u[0] = u0
    n_obs = nsteps // store_stride + 2
    dip = np.zeros(n_obs)
    norm = np.zeros(n_obs)
    bad = _tdse_loop(r, dr, dt, g_mid, float(lam), u, U, mu, cl, store_stride, dip, norm)
    if bad >= 0:
        raise NormDriftError(f"norm drift {abs(norm[bad - 1] - norm[0]):.3g} at sample {bad - 1}")
    steps = np.arange(0, nsteps + 1, store_stride)
    if steps[-1] != nsteps:
        steps = np.append(steps, nsteps)
    k = steps.size
    return steps * dt, dip[:k], norm[:k]


def nested_quadrature_phi2(pulse: PulseProfile, t: float, n_sub: int = 256) -> complex:
    """Phi_2(t) = -(i/2) int_0^t ds e^{-2is} int_0^s int_0^s e^{i(a+b)} g(a) g(b) da db.

    Three nested composite Simpson rules with n_sub points each, evaluated
    without any reuse (cost n_sub^3).
    """
    if n_sub < 16:
        raise ValueError("n_sub must be >= 16")
    m = n_sub - 1 if n_sub % 2 == 0 else n_sub     # odd point count for Simpson
    s_nodes = np.linspace(0.0, t, m)
    outer = np.zeros(m, complex)
    base = np.linspace(0.0, 1.0, m)
    wts = np.ones(m)
    wts[1:-1:2] = 4
    wts[2:-1:2] = 2
    for j, s in enumerate(s_nodes):
        if s == 0:
            continue
        tau = s * base
        w = wts * (s / (m - 1)) / 3
        f = np.exp(1j * tau) * pulse.g(tau)
        wf = w * f
        outer[j] = np.exp(-2j * s) * np.sum(np.outer(wf, wf))
    val = simpson(outer.real, x=s_nodes) + 1j * simpson(outer.imag, x=s_nodes)
    return complex(-0.5j * val)


def brute_force_q2_expectation(phi: np.ndarray, grid: RadialGrid, half_width: float = 10.0,
                               h: float = 0.1) -> complex:
    """<-1/2 grad(Phi_1).grad(Phi_1)> on a 3-D Cartesian midpoint grid.

    Phi_1 = z e^r phi(r) / r^2 with phi interpolated by a cubic spline; the
    Cartesian gradient is formed from the spline derivative and summed
    against psi0^2 = e^{-2r}/pi without any angular reduction.
    """
    sr = CubicSpline(grid.points, phi.real)
    si = CubicSpline(grid.points, phi.imag)
    ax = np.arange(-half_width + h / 2, half_width, h)
    X, Y = np.meshgrid(ax, ax, indexing="ij")
    total = 0j
    for z in ax:
        R = np.sqrt(X**2 + Y**2 + z**2)
        p = sr(R) + 1j * si(R)
        dp = sr(R, 1) + 1j * si(R, 1)
        F = np.exp(R) * p / R**2
        dF = np.exp(R) * (dp + p - 2 * p / R) / R**2
        # grad(z F) = F e_z + z F'(r) r_hat
        gx = z * dF * X / R
        gy = z * dF * Y / R
        gz = F + z * dF * z / R
        q2 = -0.5 * (gx * gx + gy * gy + gz * gz)
        total += np.sum(q2 * np.exp(-2 * R) / np.pi)
    return complex(total * h**3)
