import numpy as np
import pytest

from tdlpt.hydrogen import (NumericalFailure, RadialChannelHamiltonian,
                            asymptotic_tail_check, dipole_moment, hydrogen_shift_pipeline,
                            default_grid, polarizability, propagate_phi11, propagate_second_order,
                            shift_summary, small_r_exponent, tail_expansion, window)
from tdlpt.oracles import brute_force_q2_expectation
from tdlpt.pulses import PulseProfile

P2 = PulseProfile.sin2(0.056, 2, 0.03)


@pytest.fixture(scope="module")
def grid():
    return default_grid()


@pytest.fixture(scope="module")
def phi11(grid):
    return propagate_phi11(grid, P2, 1e-3)


def test_default_grid(grid):
    assert grid.n_points == 400 and grid.r_min == 1e-6 and grid.dr == 0.1


@pytest.mark.parametrize("ell,cent", [(0, 0.0), (1, 1.0), (2, 3.0)])
def test_channel_potential(grid, ell, cent):
    v = RadialChannelHamiltonian(ell, grid, 0.5).diagonal_potential()
    r = grid.points
    np.testing.assert_allclose(v, -1 / r + cent / r**2 + 0.5)


def test_zero_drive(grid):
    ch = propagate_phi11(grid, PulseProfile(kind="zero"), 1e-2, t_end=5.0)
    assert np.all(ch.values == 0)


def test_boundaries_and_start(phi11):
    assert np.all(phi11.values[0] == 0)
    assert np.all(phi11.values[:, 0] == 0) and np.all(phi11.values[:, -1] == 0)
    assert P2.duration <= phi11.times[-1] < P2.duration + phi11.dt


def test_snapshot_interpolates(phi11):
    t = 0.5 * (phi11.times[10] + phi11.times[11])
    np.testing.assert_allclose(phi11.snapshot(t), 0.5 * (phi11.values[10] + phi11.values[11]))


def test_bad_step_rejected(grid):
    with pytest.raises(ValueError):
        propagate_phi11(grid, P2, 0.0)


def test_small_r_exponent():
    # the fit window is [dr, 10 dr]; at dr = 0.1 it still feels the (1 + r/2) e^{-r}
    # factor of the polarisation function, so use a finer grid
    ch = propagate_phi11(default_grid(0.02), P2, 1e-3, t_end=P2.peak_time)
    assert small_r_exponent(ch, P2.peak_time) == pytest.approx(2.0, abs=0.2)


def test_energy_offset_only_changes_phase(grid):
    a = propagate_phi11(grid, P2, 1e-3, t_end=60.0)
    b = propagate_phi11(grid, P2, 1e-3, offset_free=True, t_end=60.0)
    # the two runs differ only by the time-discretisation error of the phase
    scale = np.abs(a.values).max()
    assert np.abs(a.values - b.values).max() < 1e-6 * scale
    da, db = dipole_moment(a)[1], dipole_moment(b)[1]
    assert np.abs(da - db).max() < 1e-6 * np.abs(da).max()


def test_shift_pipeline_zero(grid):
    ch = propagate_phi11(grid, PulseProfile(kind="zero"), 1e-2, t_end=2.0)
    assert np.all(hydrogen_shift_pipeline(ch).values == 0)


def test_shift_reduction_against_3d_quadrature(phi11):
    s = hydrogen_shift_pipeline(phi11)
    k = int(np.argmin(np.abs(s.times - P2.peak_time)))
    brute = brute_force_q2_expectation(phi11.values[k], phi11.grid, 10.0, 0.1)
    # remaining gap is the O(dr^2) radial derivative error, not the reduction
    assert abs(brute - s.values[k]) / abs(s.values[k]) < 2e-3


def test_shift_peaks_near_pulse_centre():
    g = default_grid()
    p = PulseProfile.sin2(0.056, 5, 0.03)
    s = hydrogen_shift_pipeline(propagate_phi11(g, p, 2e-3))
    t_ext = s.times[np.argmax(np.abs(s.values.real))]
    assert abs(t_ext - p.peak_time) <= p.period


def test_dipole_sign_and_start(phi11):
    t, d = dipole_moment(phi11)
    assert d[0] == 0
    k = int(np.argmin(np.abs(t - P2.peak_time)))
    # d = -<z> and V_int = -lam g z: d oscillates against lam*g with slope -alpha
    assert d[k] / (P2.lam * P2.g(t[k])) == pytest.approx(-4.6, rel=0.05)


def test_windows():
    assert window(P2, "cycle") == (P2.peak_time, P2.period)
    assert window(P2, "pulse") == (P2.duration / 2, P2.duration)
    assert window(P2, "custom", 1.0, 2.0) == (1.0, 2.0)
    with pytest.raises(ValueError):
        window(P2, "custom")
    with pytest.raises(ValueError):
        window(P2, "nope")


def test_polarizability_guards():
    with pytest.raises(ValueError):
        polarizability(-1.0, P2, (-10.0, 1.0))
    with pytest.raises(ValueError):
        polarizability(-1.0, P2, window(P2), mean="median")
    assert polarizability(-1.0, P2, window(P2)) == pytest.approx(4.0)


def test_summary_is_nearly_real(phi11):
    s = shift_summary(phi11)
    for key in ("E2_cycle", "E2_pulse"):
        assert abs(s[key].imag) <= 1e-3 * abs(s[key].real)


def test_tail_expansion_edge_cases():
    v, n_bad = tail_expansion(25.0, 10.0, PulseProfile(kind="zero"))
    assert v == 0 and n_bad == 0
    _, n_bad = tail_expansion(5.0, 30.0, P2)
    assert n_bad == 0     # Re(xi) = 1 stays positive for real s, t
    with pytest.raises(ValueError):
        asymptotic_tail_check(propagate_phi11(default_grid(), P2, 1e-2, t_end=1.0), P2, [5.0], 1.0)


def test_tail_leading_order_closed_form():
    # h = xi with g = 1: i r^2 e^{-r} (t - i t^2 / (2 r))
    r, t = 25.0, 3.0
    v, _ = tail_expansion(r, t, PulseProfile(kind="constant"), order=0)
    assert v == pytest.approx(1j * r**2 * np.exp(-r) * (t - 0.5j * t * t / r), rel=1e-10)
    v2, _ = tail_expansion(r, t, PulseProfile(kind="constant"), order=2)
    assert abs(v2 - v) < 0.05 * abs(v)


def test_second_order_zero(grid):
    ch = propagate_phi11(grid, PulseProfile(kind="zero"), 1e-2, t_end=2.0)
    res = propagate_second_order(ch)
    assert np.all(res.phi20.values == 0) and np.all(res.phi22.values == 0)
    assert np.all(res.e2 == 0)


def test_second_order_channels_and_law(grid):
    p = PulseProfile.sin2(0.056, 1, 0.03)
    a = propagate_phi11(grid, p, 1e-3, ground="discrete")
    res = propagate_second_order(a, obs_stride=100)
    # only l = 0 and l = 2 appear at second order
    assert (res.phi20.ell, res.phi22.ell) == (0, 2)
    assert res.phi20.order == res.phi22.order == 2
    assert np.abs(res.phi22.values).max() > 0 and np.abs(res.phi20.values).max() > 0
    assert res.expectation_residual() <= 1e-4


def test_second_order_grid_mismatch(phi11):
    with pytest.raises(ValueError):
        propagate_second_order(phi11, grid=default_grid(0.05))


def test_non_finite_drive_aborts(grid):
    bad = PulseProfile(kind="table", table_t=(0.0, 0.5, 1.0), table_g=(0.0, np.nan, 0.0))
    with pytest.raises(NumericalFailure, match="step"):
        propagate_phi11(grid, bad, 1e-2, t_end=1.0)
