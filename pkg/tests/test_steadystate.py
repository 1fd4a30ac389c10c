import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from molphase.core import EmitterParams, EmptyGrid, OutOfRange
from molphase.steadystate import (
    loglog_slope,
    max_phase,
    saturation_asymptotics,
    spectrum,
    transmission,
    transmission_physical,
    transmission_t,
    two_beam_observed_dip,
    weak_field_extrema,
)


def brute_force_extremum(eta, psi=0.0, s=1e-6, lo=0.0, hi=5.0):
    """Dense-grid maximum of |arg t| refined by a second, finer grid."""
    grid = np.linspace(lo, hi, 200001)
    ph = np.abs(np.angle(transmission_t(eta, psi, grid, s)))
    k = int(np.argmax(ph))
    fine = np.linspace(grid[max(k - 1, 0)], grid[min(k + 1, grid.size - 1)], 20001)
    phf = np.abs(np.angle(transmission_t(eta, psi, fine, s)))
    j = int(np.argmax(phf))
    return phf[j], fine[j]


def test_on_resonance_weak_field():
    ct = transmission(EmitterParams(eta=0.1), 0.0, 0.0)
    assert ct.t == pytest.approx(0.9, abs=1e-15)
    assert ct.phase == 0.0
    assert ct.extinction == pytest.approx(0.19, abs=1e-15)


def test_half_linewidth_detuning():
    ct = transmission(EmitterParams(eta=0.1), 0.5, 0.0)
    assert ct.t == pytest.approx(0.95 - 0.05j, abs=1e-15)
    assert ct.phase_deg == pytest.approx(math.degrees(math.atan2(-0.05, 0.95)), abs=1e-12)
    assert ct.phase_deg == pytest.approx(-3.0128, abs=1e-4)
    assert ct.extinction == pytest.approx(0.095, abs=1e-15)


@pytest.mark.parametrize("delta, s", [(0.0, 0.0), (3.0, 10.0), (-7.0, 0.1)])
def test_decoupled_emitter(delta, s):
    ct = transmission(EmitterParams(eta=0.0), delta, s)
    assert ct.t == 1.0 and ct.phase == 0.0 and ct.extinction == 0.0


def test_normalized_matches_physical_units():
    gamma, delta, rabi = 21.0, 13.0, 9.0
    s = 2 * rabi**2 / gamma**2
    a = transmission_t(0.3, 0.2, delta / gamma, s)
    b = transmission_physical(0.3, 0.2, gamma, delta, rabi)
    assert a == pytest.approx(b, abs=1e-15)


def test_large_detuning_and_saturation_limits():
    e = EmitterParams(eta=0.5, psi=0.3)
    assert abs(transmission(e, 1e8, 1.0).t - 1) < 1e-8
    assert abs(transmission(e, 0.3, 1e10).t - 1) < 1e-9


def test_weak_field_extrema_eta_0p1_against_brute_force():
    (phi_neg, d_pos), (phi_pos, d_neg) = weak_field_extrema(0.1)
    assert math.degrees(phi_pos) == pytest.approx(3.017, abs=1e-3)
    assert d_pos == pytest.approx(0.4743, abs=1e-4)
    assert phi_neg == -phi_pos and d_neg == -d_pos
    oracle_phi, oracle_delta = brute_force_extremum(0.1)
    assert math.degrees(oracle_phi) == pytest.approx(math.degrees(phi_pos), abs=1e-3)
    assert oracle_delta == pytest.approx(d_pos, abs=1e-3)


def test_weak_field_extrema_limits():
    (phi, d), _ = weak_field_extrema(1.0)
    assert phi == pytest.approx(-math.pi / 2) and d == 0.0
    (phi, _), _ = weak_field_extrema(0.0)
    assert phi == 0.0
    with pytest.raises(OutOfRange):
        weak_field_extrema(1.2)


def test_extrema_consistency_random_eta():
    rng = np.random.default_rng(3)
    for eta in rng.uniform(0.001, 0.999, 100):
        phi, delta = max_phase(EmitterParams(eta=eta), 1e-6)
        assert abs(phi) == pytest.approx(math.asin(eta / (2 - eta)), abs=1e-4)
        assert delta == pytest.approx(0.5 * math.sqrt(1 - eta), abs=1e-3)


def test_golden_search_matches_grid_oracle_with_saturation():
    e = EmitterParams(eta=0.3)
    phi, delta = max_phase(e, 5.0)
    o_phi, o_delta = brute_force_extremum(0.3, s=5.0, hi=10.0)
    assert abs(phi) == pytest.approx(o_phi, abs=1e-10)
    assert delta == pytest.approx(o_delta, abs=1e-4)


def test_psi_breaks_symmetry_and_both_sides_are_searched():
    e = EmitterParams(eta=0.1, psi=0.2)
    plus, _ = max_phase(e, 1e-6, sign=1)
    minus, _ = max_phase(e, 1e-6, sign=-1)
    assert abs(plus) != pytest.approx(abs(minus), rel=1e-3)
    table = saturation_asymptotics(e, [1e-6])
    assert table.max_phase[0] == pytest.approx(max(abs(plus), abs(minus)))
    o_plus, _ = brute_force_extremum(0.1, 0.2)
    o_minus, _ = brute_force_extremum(0.1, -0.2)  # mirror image of the negative side
    assert abs(plus) == pytest.approx(o_plus, abs=1e-9)
    assert abs(minus) == pytest.approx(o_minus, abs=1e-9)


def test_spectrum_rows_match_transmission():
    e = EmitterParams(eta=0.1)
    grid = np.linspace(-5, 5, 101)
    table = spectrum(e, 0.3, grid)
    for i in (0, 37, 100):
        ct = transmission(e, grid[i], 0.3)
        assert table.t[i] == ct.t
        assert table.phase[i] == ct.phase
        assert table.extinction[i] == ct.extinction


def test_spectrum_single_point():
    table = spectrum(EmitterParams(eta=0.1), 0.0, [0.0])
    assert len(table) == 1 and table.t[0] == pytest.approx(0.9)


@pytest.mark.parametrize("grid", [[], [0.0, 0.0], [1.0, 0.5]])
def test_spectrum_rejects_bad_grids(grid):
    with pytest.raises(EmptyGrid):
        spectrum(EmitterParams(), 0.0, grid)


def test_weak_field_fwhm_is_one_linewidth():
    table = spectrum(EmitterParams(eta=0.1), 1e-6, np.linspace(-5, 5, 20001))
    assert table.fwhm() == pytest.approx(1.0, abs=0.01)


def test_power_broadened_fwhm():
    # sqrt(1 + S) is exact for vanishing coupling; at eta = 0.1 the |scattered|^2
    # term narrows the dip by about 2 %
    weak = spectrum(EmitterParams(eta=1e-4), 3.0, np.linspace(-5, 5, 20001))
    assert weak.fwhm() == pytest.approx(2.0, abs=1e-3)
    typical = spectrum(EmitterParams(eta=0.1), 3.0, np.linspace(-5, 5, 20001))
    assert typical.fwhm() == pytest.approx(2.0, rel=0.025)


@pytest.mark.parametrize("single, observed", [(0.36, 0.18), (0.0, 0.0), (0.2, 0.1)])
def test_two_beam_observed_dip(single, observed):
    assert two_beam_observed_dip(single) == observed


def test_two_beam_observed_dip_rejects():
    with pytest.raises(OutOfRange):
        two_beam_observed_dip(1.2)


def test_saturation_asymptotics_at_s100():
    table = saturation_asymptotics(EmitterParams(eta=0.1), [100.0])
    # 2 eta / (1 + S) minus the quadratic correction
    assert table.on_resonance_extinction[0] == pytest.approx(2 * 0.1 / 101 - (0.1 / 101) ** 2, rel=1e-12)
    assert table.on_resonance_extinction[0] == pytest.approx(1.98e-3, rel=0.01)
    assert math.degrees(table.max_phase[0]) == pytest.approx(0.286, abs=2e-3)
    assert abs(table.max_phase_detuning[0]) == pytest.approx(5.0, abs=0.05)
    o_phi, _ = brute_force_extremum(0.1, s=100.0, hi=20.0)
    assert table.max_phase[0] == pytest.approx(o_phi, rel=1e-9)


def test_saturation_asymptotics_weak_limit():
    table = saturation_asymptotics(EmitterParams(eta=0.1), [1e-9])
    (phi, d), _ = weak_field_extrema(0.1)
    assert table.max_phase[0] == pytest.approx(abs(phi), abs=1e-8)
    assert table.max_phase_detuning[0] == pytest.approx(d, abs=1e-6)


def test_saturation_slopes():
    s = np.logspace(2, 4, 5)
    table = saturation_asymptotics(EmitterParams(eta=0.1), s)
    assert loglog_slope(s, table.on_resonance_extinction) == pytest.approx(-1.0, abs=0.02)
    assert loglog_slope(s, table.max_phase) == pytest.approx(-0.5, abs=0.02)


def test_saturation_asymptotics_rejects_nonpositive():
    with pytest.raises(OutOfRange):
        saturation_asymptotics(EmitterParams(), [0.0])


@settings(max_examples=100)
@given(st.lists(st.floats(0, 50), min_size=1, max_size=20), st.floats(0, 100), st.floats(0, 1))
def test_antisymmetry(grid, s, eta):
    e = EmitterParams(eta=eta)
    g = np.array(grid)
    a = transmission(e, g, s)
    b = transmission(e, -g, s)
    assert np.allclose(a.phase, -b.phase, atol=1e-15, rtol=0)
    assert np.allclose(a.extinction, b.extinction, atol=1e-15, rtol=0)


def test_wing_laws():
    e = EmitterParams(eta=0.1)
    wing = np.linspace(10, 100, 91)
    ct = transmission(e, wing, 0.0)
    pd = np.abs(ct.phase) * wing
    ed = ct.extinction * wing**2
    assert np.ptp(pd) / pd.mean() < 0.02
    assert np.ptp(ed) / ed.mean() < 0.02


@settings(max_examples=200)
@given(st.floats(-1e3, 1e3), st.floats(0, 1e3), st.floats(0, 1), st.floats(-math.pi, math.pi))
def test_unitarity_bound(delta, s, eta, psi):
    t = transmission_t(eta, psi, delta, s)
    assert 1 - abs(t) ** 2 <= 1 + 1e-15
    if psi == 0.0:
        assert -1e-15 <= 1 - abs(t) ** 2
