"""Hydrogen in a linearly polarised field, through second order.

With V_int = -g(t) z the first correction factorises as
Phi_1 = z e^r phi11(r, t) / r^2, and phi11 obeys a p-wave radial
Schroedinger equation shifted by +1/2 with source -r^2 e^{-r} g(t).  The
second correction is Phi_2 = (e^r / r)(phi20 + (z/r)^2 phi22) with s- and
d-wave channels fed by phi11.

Everything here is written in terms of the reduced ground state
y(r) = r psi0(r) sqrt(pi) (= r e^{-r} analytically) and E0, so a run can
use either the analytic pair or the eigenpair of the discretised radial
Hamiltonian on the same grid.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from numba import njit
from scipy.interpolate import CubicSpline

from .hierarchy import GroundState, ShiftSeries, dynamic_shift
from .numerics import (
    ComplexField,
    RadialGrid,
    TridiagonalOperator,
    _factor,
    build_grid,
)
from .pulses import PulseProfile

__all__ = [
    "NumericalFailure",
    "CorrectionChannel",
    "SecondOrderResult",
    "RadialChannelHamiltonian",
    "hydrogen_ground_state",
    "propagate_phi11",
    "propagate_second_order",
    "hydrogen_shift_pipeline",
    "phi2_expectation",
    "dipole_moment",
    "polarizability",
    "window",
    "tail_expansion",
    "asymptotic_tail_check",
    "first_order_shift",
    "small_r_exponent",
    "default_grid",
    "shift_summary",
]


class NumericalFailure(ArithmeticError):
    """A propagation produced non-finite values or a singular system."""


def default_grid(dr: float = 0.1, r_min: float = 1e-6, r_max: float = 40.0) -> RadialGrid:
    return build_grid(r_min, r_max, dr)


def hydrogen_ground_state(grid: RadialGrid, mode: str = "analytic") -> GroundState:
    """Analytic 1s state or the discrete eigenpair of the l=0 radial operator."""
    if mode == "analytic":
        return GroundState.hydrogen(grid)
    if mode == "discrete":
        return GroundState.discrete(grid, -1.0 / grid.points, "radial")
    raise ValueError(f"unknown ground-state mode {mode!r}")


def _reduced_ground(gs: GroundState) -> np.ndarray:
    return gs.psi0.values.real * gs.grid.points * np.sqrt(np.pi)


@dataclass
class RadialChannelHamiltonian:
    """-1/2 d^2/dr^2 - 1/r + l(l+1)/(2 r^2) + shift on a radial grid."""

    ell: int
    grid: RadialGrid
    shift: float = 0.5

    def diagonal_potential(self) -> np.ndarray:
        r = self.grid.points
        return -1.0 / r + self.ell * (self.ell + 1) / (2 * r**2) + self.shift

    def operator(self) -> TridiagonalOperator:
        h = self.grid.dr
        n = self.grid.n_points
        off = np.full(n, -0.5 / h**2)
        return TridiagonalOperator(off, 1.0 / h**2 + self.diagonal_potential(), off)


@dataclass
class CorrectionChannel:
    """Radial factor phi_{n,l}(r, t) stored every ``stride`` steps."""

    order: int
    ell: int
    grid: RadialGrid
    times: np.ndarray
    values: np.ndarray
    pulse: PulseProfile
    dt: float
    stride: int
    ground: str = "analytic"

    def snapshot(self, t: float) -> np.ndarray:
        """Linear interpolation between stored snapshots."""
        ts = self.times
        if t <= ts[0]:
            return self.values[0]
        if t >= ts[-1]:
            return self.values[-1]
        k = int(np.searchsorted(ts, t)) - 1
        a = (t - ts[k]) / (ts[k + 1] - ts[k])
        return (1 - a) * self.values[k] + a * self.values[k + 1]

    def field(self, t: float) -> ComplexField:
        return ComplexField(self.grid, self.snapshot(t))


# ---------------------------------------------------------------- kernels


@njit(cache=True)
def _cn_interior(u, bd, bo, ao, cp, inv, f, dt, work):
    # (1 + i dt/2 L) u_new = (1 - i dt/2 L) u_old - i dt f, Dirichlet zero ends
    n = u.size
    m = n - 2
    for j in range(m):
        i = j + 1
        work[j] = bo * u[i - 1] + bd[i] * u[i] + bo * u[i + 1] - 1j * dt * f[i]
    work[0] = work[0] * inv[0]
    for j in range(1, m):
        work[j] = (work[j] - ao * work[j - 1]) * inv[j]
    for j in range(m - 2, -1, -1):
        work[j] -= cp[j] * work[j + 1]
    for j in range(m):
        u[j + 1] = work[j]
    u[0] = 0.0
    u[n - 1] = 0.0


def _channel_factors(grid: RadialGrid, ell: int, shift: float, dt: float):
    a = 0.5j * dt
    h = grid.dr
    diag = RadialChannelHamiltonian(ell, grid, shift).operator().diag
    lo = -0.5 / h**2
    ao = a * lo
    ad = (1 + a * diag)[1:-1]
    sub = np.full(ad.size, ao, np.complex128)
    cp, inv, bad = _factor(sub, ad, sub, 1e-14)
    if bad >= 0:
        raise NumericalFailure(f"singular Crank-Nicolson matrix for l={ell}")
    return (1 - a * diag).astype(np.complex128), complex(-ao), complex(ao), cp, inv


@njit(cache=True)
def _first_order(src_shape, amp, bd, bo, ao, cp, inv, dt, stride, snaps):
    n = src_shape.size
    u = np.zeros(n, np.complex128)
    f = np.zeros(n, np.complex128)
    work = np.zeros(n, np.complex128)
    nsteps = amp.size
    k = 1
    for s in range(nsteps):
        a = amp[s]
        for i in range(n):
            f[i] = src_shape[i] * a
        _cn_interior(u, bd, bo, ao, cp, inv, f, dt, work)
        if (s + 1) % stride == 0 or s == nsteps - 1:
            for i in range(n):
                if not np.isfinite(u[i].real) or not np.isfinite(u[i].imag):
                    return s + 1
            snaps[k, :] = u
            k += 1
    return -1


@njit(cache=True)
def _e2_kernel(phi, r, dr, kappa, out):
    nt, n = phi.shape
    for k in range(nt):
        acc = 0.0 + 0.0j
        for i in range(1, n - 1):
            d = (phi[k, i + 1] - phi[k, i - 1]) / (2 * dr) - kappa[i] * phi[k, i]
            p = phi[k, i]
            acc += d * d + 2.0 * p * p / (r[i] * r[i])
        out[k] = -2.0 / 3.0 * dr * acc


@njit(cache=True)
def _second_order(src1, amp, y, kappa, r, dr, dt, f1, f0, f2, obs, stride,
                  e2, p2, s11, s20, s22):
    bd1, bo, ao, cp1, inv1 = f1
    bd0, _, _, cp0, inv0 = f0
    bd2, _, _, cp2, inv2 = f2
    n = r.size
    p11 = np.zeros(n, np.complex128)
    p20 = np.zeros(n, np.complex128)
    p22 = np.zeros(n, np.complex128)
    o11 = np.zeros(n, np.complex128)
    o22 = np.zeros(n, np.complex128)
    f = np.zeros(n, np.complex128)
    work = np.zeros(n, np.complex128)
    nsteps = amp.size
    ko = 0
    ks = 1
    for s in range(nsteps + 1):
        if s % obs == 0:
            acc = 0.0 + 0.0j
            acc2 = 0.0 + 0.0j
            for i in range(1, n - 1):
                d = (p11[i + 1] - p11[i - 1]) / (2 * dr) - kappa[i] * p11[i]
                acc += d * d + 2.0 * p11[i] ** 2 / r[i] ** 2
                acc2 += y[i] * (p20[i] + p22[i] / 3.0)
            e2[ko] = -2.0 / 3.0 * dr * acc
            p2[ko] = 4.0 * dr * acc2
            ko += 1
        if s == nsteps:
            break
        o11[:] = p11
        a = amp[s]
        for i in range(n):
            f[i] = src1[i] * a
        _cn_interior(p11, bd1, bo, ao, cp1, inv1, f, dt, work)
        # d-wave source from the time-centred phi11; 1/y carries e^r / r
        for i in range(1, n - 1):
            pm = 0.5 * (o11[i] + p11[i])
            dm = 0.25 * ((o11[i + 1] - o11[i - 1]) + (p11[i + 1] - p11[i - 1])) / dr
            dd = dm - kappa[i] * pm
            f[i] = -0.5 * (dd * dd - pm * pm / r[i] ** 2) / y[i]
        f[0] = 0.0
        f[n - 1] = 0.0
        o22[:] = p22
        _cn_interior(p22, bd2, bo, ao, cp2, inv2, f, dt, work)
        for i in range(1, n - 1):
            pm = 0.5 * (o11[i] + p11[i])
            f[i] = -0.5 * (o22[i] + p22[i]) / r[i] ** 2 - 0.5 * pm * pm / (r[i] ** 2 * y[i])
        _cn_interior(p20, bd0, bo, ao, cp0, inv0, f, dt, work)
        if (s + 1) % stride == 0 or s == nsteps - 1:
            for i in range(n):
                if not (np.isfinite(p20[i].real) and np.isfinite(p22[i].real)
                        and np.isfinite(p20[i].imag) and np.isfinite(p22[i].imag)):
                    return s + 1
            s11[ks, :] = p11
            s20[ks, :] = p20
            s22[ks, :] = p22
            ks += 1
    return -1


# ---------------------------------------------------------------- drivers


def _step_count(pulse: PulseProfile, dt: float, t_end: float | None) -> int:
    T = pulse.duration if t_end is None else t_end
    if not np.isfinite(T):
        raise ValueError("an end time is required for unbounded pulses")
    # cover the whole interval; the 1e-6 slack absorbs T/dt rounding
    return max(1, int(np.ceil(T / dt - 1e-6)))


def _stored_times(nsteps: int, stride: int, dt: float) -> np.ndarray:
    k = np.arange(stride, nsteps + 1, stride)
    if k.size == 0 or k[-1] != nsteps:
        k = np.append(k, nsteps)
    return dt * np.concatenate(([0], k))


def _default_stride(dt: float) -> int:
    return max(1, int(round(0.1 / dt)))


def propagate_phi11(grid: RadialGrid, pulse: PulseProfile, dt: float = 1e-3,
                    store_stride: int | None = None, ground: str = "analytic",
                    offset_free: bool = False, t_end: float | None = None) -> CorrectionChannel:
    """Crank-Nicolson run of the p-wave channel from phi11 = 0 to the end of the pulse.

    Source is -r y(r) g(t) at the step midpoint.  With ``offset_free`` the
    +(-E0) diagonal shift is dropped and restored as the analytic phase
    exp(i E0 t) on the source and exp(-i (-E0) t) on the stored values.
    Snapshots are kept every ``store_stride`` steps (default: every 0.1
    time units) plus the final step.
    """
    if not dt > 0:
        raise ValueError("dt must be positive")
    gs = hydrogen_ground_state(grid, ground)
    shift = -gs.E0
    stride = store_stride or _default_stride(dt)
    nsteps = _step_count(pulse, dt, t_end)
    tm = dt * (np.arange(nsteps) + 0.5)
    amp = pulse.g(tm).astype(np.complex128)
    if offset_free:
        amp = amp * np.exp(1j * shift * tm)
    y = _reduced_ground(gs)
    src = -grid.points * y
    src[0] = src[-1] = 0.0
    factors = _channel_factors(grid, 1, 0.0 if offset_free else shift, dt)
    times = _stored_times(nsteps, stride, dt)
    snaps = np.zeros((times.size, grid.n_points), np.complex128)
    bad = _first_order(src.astype(np.complex128), amp, *factors, dt, stride, snaps)
    if bad >= 0:
        raise NumericalFailure(f"non-finite phi11 at step {bad} (t={bad * dt:.6g})")
    if offset_free:
        snaps *= np.exp(-1j * shift * times)[:, None]
    return CorrectionChannel(1, 1, grid, times, snaps, pulse, dt, stride, ground)


def _kappa(grid: RadialGrid) -> np.ndarray:
    # y'/y for y = r e^{-r}
    return 1.0 / grid.points - 1.0


def hydrogen_shift_pipeline(phi11: CorrectionChannel, gs: GroundState | None = None) -> ShiftSeries:
    """E_2(t) = <Q_2> with Q_2 = -1/2 |grad Phi_1|^2 (complex square, no modulus).

    With F = e^r phi / r^2 and Phi_1 = z F, the angular integrals give

        E_2 = -(2/3) int [ (phi' - (y'/y) phi)^2 + 2 phi^2 / r^2 ] dr,

    y'/y = 1/r - 1.  Central differences and the trapezoid rule (the
    integrand vanishes at both Dirichlet ends).
    """
    grid = phi11.grid
    out = np.zeros(phi11.times.size, np.complex128)
    _e2_kernel(np.ascontiguousarray(phi11.values), grid.points, grid.dr, _kappa(grid), out)
    return ShiftSeries(phi11.times.copy(), out, order=2)


def phi2_expectation(phi20: np.ndarray, phi22: np.ndarray, gs: GroundState) -> np.ndarray:
    """<Phi_2> = 4 int y (phi20 + phi22 / 3) dr for stored snapshots."""
    y = _reduced_ground(gs)
    w = gs.grid.weights * y
    return 4.0 * (np.atleast_2d(phi20) @ w + np.atleast_2d(phi22) @ w / 3.0)


@dataclass
class SecondOrderResult:
    phi11: CorrectionChannel
    phi20: CorrectionChannel
    phi22: CorrectionChannel
    obs_times: np.ndarray
    e2: np.ndarray = field(repr=False)
    phi2_mean: np.ndarray = field(repr=False)

    def expectation_residual(self) -> float:
        from .hierarchy import expectation_evolution_residual

        return expectation_evolution_residual(self.phi2_mean, self.e2, times=self.obs_times)


def propagate_second_order(phi11: CorrectionChannel, grid: RadialGrid | None = None,
                           dt: float | None = None, obs_stride: int = 1,
                           store_stride: int | None = None,
                           t_end: float | None = None) -> SecondOrderResult:
    """Co-propagate phi11, phi22 and phi20 step by step.

    phi11 is re-advanced in lock-step (the per-step history is never
    stored) and checked against the stored ``phi11`` snapshots.  Per
    step: phi11, then phi22 (source from the time-centred phi11), then
    phi20 (source needs the time-centred phi22).  The e^r in the sources
    only ever appears as 1/y next to phi11^2, never on its own.
    <Phi_2> and E_2 are also reduced inline every ``obs_stride`` steps so
    the expectation law can be checked on a fine time mesh.
    """
    grid = grid or phi11.grid
    dt = dt or phi11.dt
    if not grid.same_as(phi11.grid) or abs(dt - phi11.dt) > 1e-15:
        raise ValueError("second order must run on the phi11 grid and step")
    gs = hydrogen_ground_state(grid, phi11.ground)
    shift = -gs.E0
    pulse = phi11.pulse
    nsteps = _step_count(pulse, dt, t_end if t_end is not None else phi11.times[-1])
    stride = store_stride or phi11.stride
    tm = dt * (np.arange(nsteps) + 0.5)
    amp = pulse.g(tm).astype(np.complex128)
    y = _reduced_ground(gs)
    src = (-grid.points * y).astype(np.complex128)
    src[0] = src[-1] = 0.0
    ysafe = y.copy()
    ysafe[0] = ysafe[-1] = 1.0
    f1 = _channel_factors(grid, 1, shift, dt)
    f0 = _channel_factors(grid, 0, shift, dt)
    f2 = _channel_factors(grid, 2, shift, dt)
    n_obs = nsteps // obs_stride + 1
    e2 = np.zeros(n_obs, np.complex128)
    p2 = np.zeros(n_obs, np.complex128)
    times = _stored_times(nsteps, stride, dt)
    s11 = np.zeros((times.size, grid.n_points), np.complex128)
    s20 = np.zeros_like(s11)
    s22 = np.zeros_like(s11)
    bad = _second_order(src, amp, ysafe, _kappa(grid), grid.points, grid.dr, dt,
                        f1, f0, f2, obs_stride, stride, e2, p2, s11, s20, s22)
    if bad >= 0:
        raise NumericalFailure(f"non-finite second-order channel at step {bad}")
    if stride == phi11.stride and times.size <= phi11.times.size:
        ref = phi11.values[: times.size]
        scale = max(np.abs(ref).max(), 1e-300)
        if np.abs(ref - s11).max() > 1e-9 * scale:
            raise NumericalFailure("co-propagated phi11 departs from the stored channel")
    mk = lambda ell, v: CorrectionChannel(2, ell, grid, times, v, pulse, dt, stride, phi11.ground)
    ch11 = CorrectionChannel(1, 1, grid, times, s11, pulse, dt, stride, phi11.ground)
    obs_t = dt * obs_stride * np.arange(n_obs)
    return SecondOrderResult(ch11, mk(0, s20), mk(2, s22), obs_t, e2, p2)


def dipole_moment(phi11: CorrectionChannel, pulse: PulseProfile | None = None):
    """Induced dipole d(t) = -<z> to first order in lam.

    <z> = 2 lam Re <z Phi_1> = (8/3) lam Re int phi11 e^{-r} r^2 dr for the
    analytic ground state; returns (times, d).
    """
    pulse = pulse or phi11.pulse
    grid = phi11.grid
    r = grid.points
    w = grid.weights * np.exp(-r) * r**2
    d = -(8.0 / 3.0) * pulse.lam * (phi11.values @ w).real
    return phi11.times.copy(), d


def window(pulse: PulseProfile, which: str = "cycle", t0: float | None = None,
           T: float | None = None) -> tuple[float, float]:
    """(t0, T) for the one-cycle-at-peak, full-pulse or a custom window."""
    if which == "cycle":
        return pulse.peak_time, pulse.period
    if which == "pulse":
        return pulse.duration / 2, pulse.duration
    if which == "custom":
        if t0 is None or T is None:
            raise ValueError("custom window needs t0 and T")
        return t0, T
    raise ValueError(f"unknown window {which!r}")


def polarizability(shift: complex, pulse: PulseProfile, win: tuple[float, float],
                   mean: str = "carrier") -> float:
    """alpha = -2 Re(E2bar) / <g^2>.

    ``mean="carrier"`` takes <g^2> = 1/2, the cycle mean of cos^2 under a
    unit envelope; ``mean="window"`` integrates g^2 of the actual pulse
    over the window.
    """
    t0, T = win
    s = np.linspace(t0 - T / 2, t0 + T / 2, 20001)
    g2_window = float(np.trapezoid(pulse.g(s) ** 2, s) / T)
    if g2_window <= 1e-14:
        raise ValueError("field vanishes over the averaging window")
    if mean == "carrier":
        g2 = 0.5
    elif mean == "window":
        g2 = g2_window
    else:
        raise ValueError(f"unknown mean {mean!r}")
    return float(-2.0 * np.real(shift) / g2)


def tail_expansion(r: float, t: float, pulse: PulseProfile, ds: float = 1e-2,
                   order: int = 2) -> tuple[complex, int]:
    """i r^2 e^{-r} int_0^t h(xi) g(s) ds with xi = 1 + i (s - t)/r.

    ``order`` 0 keeps h = xi, 1 adds the 1/r term, 2 is the full form.
    Samples with Re(xi) <= 0 would cross the log branch cut; they are
    dropped and counted.
    """
    n = max(2, int(np.ceil(t / ds)))
    n += n % 2
    s = np.linspace(0.0, t, n + 1)
    xi = 1 + 1j * (s - t) / r
    ok = xi.real > 0
    lg = np.log(np.where(ok, xi, 1.0))
    h = xi.copy()
    if order >= 1:
        h = h + (xi - 1 - lg) / r
    if order >= 2:
        h = h + (xi - 1) / r**2 * ((1 + xi) * (xi - 1) / (2 * xi**2) - lg / xi)
    integrand = np.where(ok, h * pulse.g(s), 0.0)
    from scipy.integrate import simpson

    val = 1j * r**2 * np.exp(-r) * (simpson(integrand.real, x=s) + 1j * simpson(integrand.imag, x=s))
    return complex(val), int(np.count_nonzero(~ok))


def asymptotic_tail_check(phi11: CorrectionChannel, pulse: PulseProfile | None,
                          r_probe, t: float, order: int = 2) -> np.ndarray:
    """|numeric - asymptotic| / |numeric| at each probe radius."""
    pulse = pulse or phi11.pulse
    r_probe = np.atleast_1d(np.asarray(r_probe, float))
    grid = phi11.grid
    lo, hi = grid.r_max / 2 - 1e-9, 0.9 * grid.r_max + 1e-9
    if np.any(r_probe < lo) or np.any(r_probe > hi):
        raise ValueError("probe radii must lie in [R_max/2, 0.9 R_max]")
    snap = phi11.snapshot(t)
    spline_re = CubicSpline(grid.points, snap.real)
    spline_im = CubicSpline(grid.points, snap.imag)
    errs = np.zeros(r_probe.size)
    for j, rp in enumerate(r_probe):
        num = spline_re(rp) + 1j * spline_im(rp)
        asym, _ = tail_expansion(rp, t, pulse, order=order)
        errs[j] = 0.0 if num == 0 and asym == 0 else abs(num - asym) / abs(num)
    return errs


def first_order_shift(g_t: float, gs: GroundState, n_theta: int = 32) -> float:
    """E_1(t) = <-g(t) z> by a product Gauss-Legendre rule in cos(theta)."""
    mu, wmu = np.polynomial.legendre.leggauss(n_theta)
    r = gs.grid.points
    rad = gs.grid.weights * gs.psi0.values.real**2 * r**3 * 2 * np.pi
    return float(-g_t * np.dot(rad, np.ones_like(r)) * np.dot(wmu, mu))


def small_r_exponent(phi11: CorrectionChannel, t: float) -> float:
    """Least-squares slope of log|phi11| against log r on [dr, 10 dr]."""
    grid = phi11.grid
    snap = np.abs(phi11.snapshot(t))
    r = grid.points
    m = (r >= grid.dr * 0.999) & (r <= 10 * grid.dr * 1.001) & (snap > 0)
    return float(np.polyfit(np.log(r[m]), np.log(snap[m]), 1)[0])


def shift_summary(phi11: CorrectionChannel, mean: str = "carrier") -> dict:
    """Cycle-at-peak and full-pulse means of E_2 plus alpha."""
    series = hydrogen_shift_pipeline(phi11)
    pulse = phi11.pulse
    cyc = window(pulse, "cycle")
    full = window(pulse, "pulse")
    e_cyc = dynamic_shift(series, *cyc)
    e_pul = dynamic_shift(series, *full)
    return {
        "N": pulse.n_cycles,
        "E2_cycle": e_cyc,
        "E2_pulse": e_pul,
        "alpha": polarizability(e_cyc, pulse, cyc, mean),
        "series": series,
    }
