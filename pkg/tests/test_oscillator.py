import numpy as np
import pytest
import sympy as sp

from tdlpt.numerics import build_grid
from tdlpt.oracles import nested_quadrature_phi2
from tdlpt.oscillator import (adiabatic_W, classical_trajectory, ho_ac_shift, ho_corrections,
                              ho_exact_solution, ho_phi1, ho_phi2, ho_sum_over_states,
                              ho_tdlpt_state, ho_truncation_check, sum_over_states_shift)
from tdlpt.pulses import PulseProfile

PULSE = PulseProfile.sin2(0.5, 4, 0.03)


@pytest.fixture(scope="module")
def xgrid():
    return build_grid(-6.0, 6.0, 0.01, cartesian=True)


def test_zero_drive_gives_zero_corrections():
    z = PulseProfile(kind="zero")
    assert ho_phi1(z, 3.0) == 0 and ho_phi2(z, 3.0) == 0


def test_constant_drive_closed_form():
    p = PulseProfile(kind="constant")
    for t in (0.5, 2.0, 7.3):
        assert abs(ho_phi1(p, t) + (1 - np.exp(-1j * t))) <= 1e-8


def test_adiabatic_limit():
    p = PulseProfile(omega=0.3, kind="adiabatic")
    assert ho_phi1(p, 1.7) == pytest.approx(-1j * adiabatic_W(0.3, 1.7))
    with pytest.raises(ValueError):
        ho_corrections(p, 1.0)


def test_initial_values_vanish():
    c = ho_corrections(PULSE, PULSE.duration)
    assert c.c1[0] == 0 and c.c2[0] == 0


def test_cumulative_matches_direct_quadrature():
    c = ho_corrections(PULSE, PULSE.duration, 1e-3)
    for t in (5.0, 20.0, PULSE.duration):
        c1, _ = c.at(t)
        assert abs(c1 - ho_phi1(PULSE, c.times[np.argmin(abs(c.times - t))])) < 1e-10


def test_phi2_against_nested_quadrature():
    p = PulseProfile.sin2(0.5, 2, 0.03)
    for t in (5.0, 12.0, p.duration):
        assert abs(ho_phi2(p, t) - nested_quadrature_phi2(p, t, 256)) <= 1e-6


def test_first_order_matches_classical_trajectory():
    ts, q, p, _ = classical_trajectory(PULSE, 0.03, PULSE.duration, 1e-3)
    c = ho_corrections(PULSE, PULSE.duration, 1e-3)
    c1 = np.interp(ts, c.times, c.c1.real) + 1j * np.interp(ts, c.times, c.c1.imag)
    assert np.max(np.abs(0.03 * c1 - (q + 1j * p))) < 1e-9


def test_exact_solution_free_limit(xgrid):
    psi = ho_exact_solution(PULSE, 0.0, xgrid, 3.0).values
    ref = np.pi**-0.25 * np.exp(-0.5 * xgrid.points**2) * np.exp(-1.5j)
    assert np.max(np.abs(psi - ref)) < 1e-10


def test_exact_solution_is_normalised():
    g = build_grid(-10, 10, 0.01, cartesian=True)
    for t in (10.0, 30.0, PULSE.duration):
        psi = ho_exact_solution(PULSE.scaled(10), 0.3, g, t).values
        assert np.dot(g.weights, np.abs(psi) ** 2) == pytest.approx(1.0, abs=1e-8)


@pytest.mark.parametrize("lam", [0.03, 0.1])
def test_closed_form_state_is_exact(xgrid, lam):
    c = ho_corrections(PULSE, PULSE.duration, 1e-3)
    for t in np.linspace(0, PULSE.duration, 7):
        k = int(np.argmin(np.abs(c.times - t)))
        a = ho_tdlpt_state(xgrid.points, c.times[k], c.c1[k], c.c2[k], lam)
        b = ho_exact_solution(PULSE, lam, xgrid, c.times[k]).values
        assert np.max(np.abs(a - b)) <= 1e-6


def test_residual_set_by_quadrature_not_coupling(xgrid):
    # coarse step: the error shrinks with dt like a 4th order rule and barely
    # moves with lam, so it is not an O(lam^3) truncation remainder
    def worst(lam, dt):
        c = ho_corrections(PULSE, PULSE.duration, dt)
        t = c.times[-1]
        a = ho_tdlpt_state(xgrid.points, t, c.c1[-1], c.c2[-1], lam)
        return np.max(np.abs(a - ho_exact_solution(PULSE, lam, xgrid, t, 1e-3).values))

    e1, e2 = worst(0.1, 0.4), worst(0.1, 0.2)
    assert e1 / e2 > 8
    assert worst(0.05, 0.4) > e1 / 4


def test_truncation(xgrid):
    ts = np.linspace(0, PULSE.duration, 9)
    assert ho_truncation_check(PULSE, ts, xgrid) <= 1e-12
    assert ho_truncation_check(PulseProfile(kind="zero"), [1.0], xgrid) == 0
    a = ho_truncation_check(PULSE, ts, xgrid, perturbation=1e-3)
    b = ho_truncation_check(PULSE, ts, xgrid, perturbation=2e-3)
    assert a > 0 and b / a == pytest.approx(2.0, rel=1e-6)


@pytest.mark.parametrize("w", [0.3, 0.5, 2.0])
def test_ac_shift_closed_form(w):
    assert abs(ho_ac_shift(w) - 1 / (4 * (w * w - 1))) <= 1e-9


def test_ac_shift_phase_independent():
    assert ho_ac_shift(0.5, t0=0.0) == pytest.approx(ho_ac_shift(0.5, t0=3.7), abs=1e-12)


def test_ac_shift_large_frequency():
    for w in (10.0, 100.0):
        v = ho_ac_shift(w)
        assert v > 0 and v * 4 * w * w == pytest.approx(1.0, rel=2 / w**2)


def test_ac_shift_resonance_rejected():
    with pytest.raises(ValueError):
        ho_ac_shift(1.0 + 1e-8)


def test_sum_over_states_symbolic():
    w = sp.Symbol("omega", positive=True)
    expr = ho_sum_over_states(w)
    assert sp.simplify(expr - 1 / (4 * (w**2 - 1))) == 0
    assert ho_sum_over_states(0.5) == pytest.approx(-1 / 3)
    assert sum_over_states_shift(0.5, [], []) == 0
