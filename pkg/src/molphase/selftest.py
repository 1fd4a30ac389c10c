"""Fast invariant checks across all modules, runnable without pytest."""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from . import bloch, floquet, heterodyne, imaging, steadystate
from .core import EmitterParams, rabi_from_saturation, saturation_from_rabi
from .fitting import SpectrumParams, fit, model_two_beam


@dataclass(frozen=True)
class Check:
    module: str
    name: str
    passed: bool
    value: float
    limit: float


def _check(module, name, value, limit, below=True):
    value = float(value)
    ok = value <= limit if below else value >= limit
    return Check(module, name, bool(ok), value, float(limit))


def core_checks(rng):
    k = 10.0 ** rng.uniform(-3, 3, 50)
    g, d, om = 21.0, rng.uniform(-60, 60, 50), rng.uniform(0, 40, 50)
    t_a = steadystate.transmission_physical(0.1, 0.2, g, d, om)
    t_b = steadystate.transmission_physical(0.1, 0.2, k * g, k * d, k * om)
    s = 10.0 ** rng.uniform(-6, 4, 50)
    back = saturation_from_rabi(rabi_from_saturation(s))
    return [
        _check("core", "homogeneity_degree_zero", np.max(np.abs(t_a - t_b)), 1e-12),
        _check("core", "saturation_round_trip", np.max(np.abs(back / s - 1)), 1e-12),
    ]


def steadystate_checks(rng):
    out = []
    e = EmitterParams(eta=0.1)
    grid = rng.uniform(0, 20, 200)
    s = rng.uniform(0, 10)
    a = steadystate.transmission(e, grid, s)
    b = steadystate.transmission(e, -grid, s)
    out.append(_check("steadystate", "antisymmetry", np.max(np.abs(a.phase + b.phase)) + np.max(np.abs(a.extinction - b.extinction)), 1e-14))
    worst_phi, worst_delta = 0.0, 0.0
    for eta in rng.uniform(0.01, 0.99, 20):
        phi, delta = steadystate.max_phase(EmitterParams(eta=eta), 1e-6)
        worst_phi = max(worst_phi, abs(abs(phi) - math.asin(eta / (2 - eta))))
        worst_delta = max(worst_delta, abs(delta - 0.5 * math.sqrt(1 - eta)))
    out.append(_check("steadystate", "extrema_phase_rad", worst_phi, 1e-4))
    out.append(_check("steadystate", "extrema_detuning", worst_delta, 1e-3))
    wing = np.linspace(10, 40, 31)
    w = steadystate.transmission(e, wing, 0.0)
    pd = np.abs(w.phase) * wing
    ed = w.extinction * wing**2
    out.append(_check("steadystate", "phase_wing_1_over_delta", np.ptp(pd) / np.mean(pd), 0.02))
    out.append(_check("steadystate", "extinction_wing_1_over_delta2", np.ptp(ed) / np.mean(ed), 0.02))
    u = steadystate.transmission_t(1.0, 0.0, rng.uniform(-5, 5, 500), rng.uniform(0, 5, 500))
    out.append(_check("steadystate", "unitarity_bound", np.max(1 - np.abs(u) ** 2), 1.0))
    return out


def bloch_checks(rng):
    n = 20
    det = rng.uniform(-10, 10, n)
    s = 10.0 ** rng.uniform(-4, 1, n)
    rabi = rabi_from_saturation(s)
    eta = rng.uniform(0, 1, n)
    psi = rng.uniform(-math.pi, math.pi, n)
    dt = bloch.max_step(10.0, float(np.max(rabi)))
    end = bloch.integrate(bloch.BlochState(np.ones(n), np.zeros(n, complex)), det, rabi, 30.0, dt)
    t = 1.0 + 1j * eta * np.exp(-1j * psi) * end.coh / rabi
    ref = steadystate.transmission_t(eta, psi, det, s)
    out = [_check("bloch", "steady_state_equivalence", np.max(np.abs(t - ref)), 1e-6)]
    e = EmitterParams(eta=0.1)
    sched = bloch.DetuningSchedule(((0.0, 1.0), (0.5, -20.0), (1.0, 1.0)))
    traj = bloch.simulate_switch(e, 0.5, sched, None, 2.0, output_dt=0.01)
    purity = traj.w**2 + 4 * np.abs(traj.coh) ** 2
    out.append(_check("bloch", "purity_bound", np.max(purity) - 1.0, 1e-9))
    smooth = bloch.DetuningSchedule(((0.0, 10.0), (0.5, -10.0)), rise_time=0.25)
    start = bloch.GROUND
    ends = [bloch.simulate_switch(e, 10.0, smooth, h, 1.0, output_dt=0.25, initial=start)
            for h in (0.005, 0.0025, 0.0003125)]
    err1 = abs(ends[0].coh[-1] - ends[2].coh[-1]) + abs(ends[0].w[-1] - ends[2].w[-1])
    err2 = abs(ends[1].coh[-1] - ends[2].coh[-1]) + abs(ends[1].w[-1] - ends[2].w[-1])
    out.append(_check("bloch", "rk4_convergence_ratio", err1 / err2, 8.0, below=False))
    return out


def floquet_checks(rng):
    e = EmitterParams(eta=0.1, psi=0.1)
    out = []
    drive = floquet.BichromaticDrive.from_saturation(1.0, 1.0, 5.44, -1.3)
    hs = floquet.solve_harmonics(e, drive)
    w_t, c_t, i_t = hs.reconstruct(np.linspace(0, 2 * math.pi / 5.44, 64))
    out.append(_check("floquet", "reality", max(np.max(np.abs(w_t.imag)), np.max(np.abs(i_t.imag))), 1e-10))
    h8 = floquet.solve_harmonics(e, drive, 8, auto=False)
    h16 = floquet.solve_harmonics(e, drive, 16, auto=False)
    out.append(_check("floquet", "truncation_doubling", np.max(np.abs(h8.coh - h16.coh[8:-8])), 1e-8))
    mono = floquet.solve_harmonics(e, floquet.BichromaticDrive.from_saturation(2.0, 0.0, 5.44, 0.7))
    ss = bloch.steady_state(0.7, rabi_from_saturation(2.0))
    out.append(_check("floquet", "monochromatic_reduction", abs(mono.c(0) - ss.coh) + abs(mono.w[mono.N] - ss.w), 1e-9))
    weak = floquet.BichromaticDrive.from_saturation(1e-4, 1e-4, 5.44, -2.72)
    t1, t2 = floquet.corrected_single_beam(floquet.solve_harmonics(e, weak), e, weak)
    r1 = steadystate.transmission(e, -2.72, 1e-4).t
    r2 = steadystate.transmission(e, 2.72, 1e-4).t
    rel = max(abs((t1.t - 1) / (r1 - 1) - 1), abs((t2.t - 1) / (r2 - 1) - 1))
    out.append(_check("floquet", "weak_field_superposition", rel, 1e-3))
    return out


def heterodyne_checks(rng):
    cfg = heterodyne.DetectionConfig(mean_count_rate=2e5, duration=1.0, jitter_sigma=300.0, seed=7)
    inten = heterodyne.synthesize_intensity(1.0, 1.0, cfg)
    a = heterodyne.sample_photons(inten, cfg)
    b = heterodyne.sample_photons(inten, cfg)
    same = a.size == b.size and bool(np.all(a == b))
    out = [Check("heterodyne", "determinism", same, float(same), 1.0)]
    fit_ = heterodyne.fit_beat(heterodyne.start_stop_histogram(a, cfg), cfg)
    expect = heterodyne.jitter_attenuation(cfg.beat_frequency, cfg.jitter_sigma)
    out.append(_check("heterodyne", "jitter_visibility", abs(fit_.visibility / expect - 1), 0.01))
    return out


def imaging_checks(rng):
    e = EmitterParams(eta=0.1)
    grid = imaging.ScanGrid.square(1.0, 0.05)
    im = imaging.render_images(e, (0.0, 0.0), grid, 2 * 57 / 21)
    rot = np.max(np.abs(im.beat_phase - np.rot90(im.beat_phase)))
    k = np.unravel_index(np.argmax(np.abs(im.beat_phase)), im.beat_phase.shape)
    off = math.hypot(grid.x[k[1]], grid.y[k[0]]) / 0.05
    return [
        _check("imaging", "radial_symmetry", rot, 1e-12),
        _check("imaging", "peak_location_pixels", off, 1.0),
    ]


def fitting_checks(rng):
    true = SpectrumParams(21.0, 3.0, 0.1, 0.1, 0.002)
    nu = np.linspace(-200.0, 100.0, 121)
    ext, ph = model_two_beam(true, nu)
    res = fit(nu, ext, ph, SpectrumParams(28.0, 8.0, 0.13, 0.0, 0.0), sigma_extinction=0.005, sigma_phase_deg=0.2)
    got = res.params.as_array()
    want = true.as_array()
    rel = np.max(np.abs(got - want) / np.maximum(np.abs(want), 1e-2))
    mono = bool(np.all(np.diff(res.cost_history) <= 0))
    return [
        _check("fitting", "noiseless_recovery", rel, 1e-6),
        Check("fitting", "monotone_cost", mono, float(mono), 1.0),
    ]


SUITES = (core_checks, steadystate_checks, bloch_checks, floquet_checks, heterodyne_checks, imaging_checks,
          fitting_checks)


def run_all(seed: int = 0):
    rng = np.random.default_rng(seed)
    checks = []
    for suite in SUITES:
        checks.extend(suite(rng))
    return checks
