import json
import math

import numpy as np
import pytest
from scipy.optimize import least_squares

from molphase.core import OutOfRange, wrap_phase
from molphase.fitting import (
    PARAM_NAMES,
    NoConvergence,
    PowerSpectrum,
    SingularCovariance,
    SpectrumParams,
    extract_power_point,
    finite_difference_jacobian,
    fit,
    fit_power_series,
    levenberg_marquardt,
    model_two_beam,
    saturation_model,
    synthesize_power_series,
    synthesize_two_beam,
)
from molphase.steadystate import on_resonance_extinction, transmission_t, weak_field_extrema

TRUE = SpectrumParams(21.0, 0.0, 0.1, 0.0, 0.0)
NU = np.linspace(-250.0, 150.0, 201)
SE, SP = 0.005, 0.2


def test_model_against_closed_form():
    ext, ph = model_two_beam(TRUE, [0.0, -114.3])
    t_res = transmission_t(0.1, 0.0, 0.0, 0.0)
    t_far = transmission_t(0.1, 0.0, 114.3 / 21, 0.0)
    dip = 1 - 0.5 * (abs(t_res) ** 2 + abs(t_far) ** 2)
    assert ext[0] == pytest.approx(dip, abs=1e-15)
    assert ext[1] == pytest.approx(dip, abs=1e-15)
    # either beam on resonance: the other one, on the opposite wing, sets the sign
    assert ph[0] == pytest.approx(ph[1], abs=1e-12)
    assert ph[0] == pytest.approx(-np.degrees(np.angle(t_far)), abs=1e-12)


def test_two_tone_model_reduces_to_closed_form():
    from molphase.floquet import BichromaticDrive, beat_scan

    drive = BichromaticDrive.from_saturation(1e-6, 1e-6, 114.3 / 21, 0.0)
    beat, ext, _ = beat_scan(TRUE.emitter(), drive, NU / 21)
    ext_cf, ph_cf = model_two_beam(TRUE, NU)
    np.testing.assert_allclose(ext, ext_cf, atol=1e-5)
    np.testing.assert_allclose(np.degrees(beat), ph_cf, atol=1e-3)


def test_saturated_model_uses_two_tone_solution():
    # with both beams on, each saturates the other: the dip is below the
    # single-beam closed form at the same per-beam saturation
    two_tone, _ = model_two_beam(TRUE, [0.0], saturation=1.0)
    t_res = transmission_t(0.1, 0.0, 0.0, 1.0)
    t_far = transmission_t(0.1, 0.0, 114.3 / 21, 1.0)
    single = 1 - 0.5 * (abs(t_res) ** 2 + abs(t_far) ** 2)
    assert two_tone[0] < single


def test_jacobian_against_analytic():
    def f(x):
        return np.array([x[0] ** 2, math.sin(x[1]) * x[0]])

    J = finite_difference_jacobian(f, np.array([1.5, 0.3]), [1e-6, 1e-6])
    ref = np.array([[3.0, 0.0], [math.sin(0.3), 1.5 * math.cos(0.3)]])
    np.testing.assert_allclose(J, ref, atol=1e-8)


def test_lm_rosenbrock():
    res = levenberg_marquardt(lambda x: np.array([10 * (x[1] - x[0] ** 2), 1 - x[0]]),
                              [-1.2, 1.0], [1e-7, 1e-7], max_iter=500)
    np.testing.assert_allclose(res.x, [1.0, 1.0], atol=1e-6)
    assert all(b <= a for a, b in zip(res.cost_history, res.cost_history[1:]))


def test_lm_iteration_cap():
    with pytest.raises(NoConvergence):
        levenberg_marquardt(lambda x: np.array([10 * (x[1] - x[0] ** 2), 1 - x[0]]),
                            [-1.2, 1.0], [1e-7, 1e-7], max_iter=2)


def test_fit_matches_scipy_least_squares():
    ext, ph = synthesize_two_beam(TRUE, NU, sigma_extinction=SE, sigma_phase_deg=SP, seed=4)
    res = fit(NU, ext, ph, SpectrumParams(23.0, 4.0, 0.08, 0.1, 0.0), sigma_extinction=SE, sigma_phase_deg=SP)

    def residuals(p):
        m_ext, m_ph = model_two_beam(SpectrumParams.from_array(p), NU)
        return np.concatenate([(m_ext - ext) / SE, np.degrees(wrap_phase(np.radians(m_ph - ph))) / SP])

    ref = least_squares(residuals, [23.0, 4.0, 0.08, 0.1, 0.0], xtol=1e-14, ftol=1e-14, gtol=1e-14)
    np.testing.assert_allclose(res.params.as_array(), ref.x, rtol=1e-5, atol=1e-7)
    cov_ref = np.linalg.inv(ref.jac.T @ ref.jac)
    for i, name in enumerate(PARAM_NAMES):
        assert res.uncertainties[name] == pytest.approx(math.sqrt(cov_ref[i, i]), rel=1e-3)


def test_fit_noiseless_recovers_truth():
    ext, ph = model_two_beam(TRUE, NU)
    res = fit(NU, ext, ph, SpectrumParams(25.0, 5.0, 0.08, 0.2, 0.01), sigma_extinction=SE, sigma_phase_deg=SP)
    np.testing.assert_allclose(res.params.as_array(), TRUE.as_array(), atol=1e-6)


def test_fit_from_factor_two_start():
    ext, ph = synthesize_two_beam(TRUE, NU, seed=9)
    res = fit(NU, ext, ph, SpectrumParams(42.0, 10.0, 0.2, 0.0, 0.0))
    assert res.params.gamma_mhz == pytest.approx(21.0, abs=4 * res.uncertainties["gamma_mhz"])
    assert res.params.eta == pytest.approx(0.1, abs=4 * res.uncertainties["eta"])


def test_cost_history_monotone():
    ext, ph = synthesize_two_beam(TRUE, NU, seed=1)
    res = fit(NU, ext, ph, SpectrumParams(30.0, 8.0, 0.05, 0.3, 0.0), sigma_extinction=SE, sigma_phase_deg=SP)
    h = res.cost_history
    assert all(b <= a for a, b in zip(h, h[1:]))


def test_noise_estimated_when_not_given():
    ext, ph = synthesize_two_beam(TRUE, NU, sigma_extinction=SE, sigma_phase_deg=SP, seed=3)
    res = fit(NU, ext, ph, SpectrumParams(22.0, 1.0, 0.09, 0.0, 0.0))
    assert res.sigma_extinction == pytest.approx(SE, rel=0.2)
    assert res.sigma_phase_deg == pytest.approx(SP, rel=0.2)


def test_confidence_interval_coverage():
    hits = {n: 0 for n in PARAM_NAMES}
    trials = 200
    for seed in range(trials):
        ext, ph = synthesize_two_beam(TRUE, NU, sigma_extinction=SE, sigma_phase_deg=SP, seed=seed)
        res = fit(NU, ext, ph, SpectrumParams(22.0, 2.0, 0.09, 0.05, 0.0), sigma_extinction=SE, sigma_phase_deg=SP)
        for n in PARAM_NAMES:
            lo, hi = res.confidence_interval(n)
            hits[n] += lo <= getattr(TRUE, n) <= hi
    for n, h in hits.items():
        # nominal 0.95; binomial standard error ~0.015
        assert h / trials >= 0.90, (n, h)


def test_uncertainty_scales_with_points():
    errs = []
    for reps in (1, 4):
        nu = np.repeat(NU, reps)
        ext, ph = synthesize_two_beam(TRUE, nu, sigma_extinction=SE, sigma_phase_deg=SP, seed=reps)
        res = fit(nu, ext, ph, TRUE, sigma_extinction=SE, sigma_phase_deg=SP)
        errs.append(res.uncertainties["eta"])
    assert errs[0] / errs[1] == pytest.approx(2.0, rel=0.05)


def test_fit_input_validation():
    with pytest.raises(OutOfRange):
        fit(NU[:10], np.zeros(10), np.zeros(10), TRUE)
    with pytest.raises(OutOfRange):
        fit(NU, np.zeros(NU.size), np.zeros(3), TRUE)


def test_flat_data_has_singular_covariance():
    flat = np.zeros(NU.size)
    with pytest.raises(SingularCovariance):
        fit(NU, flat, flat, SpectrumParams(21.0, 0.0, 0.0, 0.0, 0.0), sigma_extinction=SE, sigma_phase_deg=SP)


def test_fit_report_json(tmp_path):
    ext, ph = synthesize_two_beam(TRUE, NU, seed=2)
    res = fit(NU, ext, ph, TRUE, sigma_extinction=SE, sigma_phase_deg=SP)
    res.to_json(tmp_path / "r.json")
    data = json.loads((tmp_path / "r.json").read_text())
    assert set(data["params"]) == set(PARAM_NAMES)
    assert len(data["covariance"]) == 5


def test_extract_power_point():
    grid = np.linspace(-0.9, 0.9, 37)
    phase = 1.0 - (grid - 0.05) ** 2
    sample = PowerSpectrum(1.0, grid, 2.0 - grid**2 + 5 * grid**4, phase)
    ext, ph = extract_power_point(sample)
    assert ext == pytest.approx(2.0, abs=1e-12)  # line center, not the larger wing values
    assert ph == pytest.approx(1.0, abs=1e-12)  # parabolic refinement is exact for a parabola
    with pytest.raises(OutOfRange):
        extract_power_point(PowerSpectrum(1.0, grid + 5, phase, phase))


def test_saturation_model_weak_limit():
    ext, ph = saturation_model(0.1, 1e-6, [1.0])
    assert ext[0] == pytest.approx(on_resonance_extinction(0.1, 0.0), rel=1e-5)
    assert ph[0] == pytest.approx(-weak_field_extrema(0.1)[0][0], rel=1e-5)


def test_power_series_recovers_parameters():
    spectra = synthesize_power_series(0.1, 0.1, np.logspace(0, 4, 9))
    res = fit_power_series(spectra)
    assert res.eta == pytest.approx(0.1, rel=1e-3)
    assert res.reference_saturation == pytest.approx(0.1, rel=1e-3)
    assert not res.degenerate


def test_power_series_extinction_only_at_high_power_is_degenerate():
    spectra = synthesize_power_series(0.1, 0.1, np.logspace(2, 4, 5))
    res = fit_power_series(spectra, channels=("extinction",))
    assert res.degenerate
    both = fit_power_series(spectra)
    assert abs(both.correlation) < abs(res.correlation)


def test_power_series_validation():
    spectra = synthesize_power_series(0.1, 0.1, [1.0, 2.0, 3.0, 4.0], points=101)
    with pytest.raises(OutOfRange):
        fit_power_series(spectra)
