"""Closed-form single-beam response of a weakly or strongly driven emitter.

All detunings are in linewidth units (Delta / Gamma).
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .core import ComplexTransmission, EmitterParams, EmptyGrid, OutOfRange, validate


def lorentzian_factor(detuning, saturation):
    """Gamma (Gamma + 2i Delta) / (4 Delta^2 + Gamma^2 (1 + S)) with Gamma = 1."""
    detuning = np.asarray(detuning, dtype=float)
    return (1.0 + 2j * detuning) / (4.0 * detuning**2 + 1.0 + np.asarray(saturation, dtype=float))


def transmission_t(eta, psi, detuning, saturation):
    """Complex transmission as a bare array expression (broadcasts)."""
    return 1.0 - eta * np.exp(-1j * psi) * lorentzian_factor(detuning, saturation)


def transmission_physical(eta, psi, gamma, detuning, rabi):
    """Transmission evaluated directly in physical units (any consistent frequency unit)."""
    gamma = np.asarray(gamma, dtype=float)
    detuning = np.asarray(detuning, dtype=float)
    rabi = np.asarray(rabi, dtype=float)
    num = gamma**2 + 2j * detuning * gamma
    den = 2.0 * rabi**2 + 4.0 * detuning**2 + gamma**2
    return 1.0 - eta * np.exp(-1j * psi) * num / den


def transmission(emitter: EmitterParams, detuning, saturation) -> ComplexTransmission:
    """Field transmission of one beam at ``detuning`` (linewidth units)."""
    validate(emitter)
    t = transmission_t(emitter.eta, emitter.psi, detuning, saturation)
    if np.ndim(t) == 0:
        t = complex(t)
    return ComplexTransmission(t)


def weak_field_extrema(eta: float):
    """Extremal weak-field phase and where it occurs.

    Returns ``((phi_minus, delta_plus), (phi_plus, delta_minus))``: the
    negative phase extremum sits at positive detuning and vice versa.
    Phases in radians, detunings in linewidth units.
    """
    if not 0.0 <= eta <= 1.0:
        raise OutOfRange("eta", "must lie in [0, 1]")
    phi = math.asin(eta / (2.0 - eta))
    delta = 0.5 * math.sqrt(1.0 - eta)
    return (-phi, delta), (phi, -delta)


def _search_bound(saturation: float) -> float:
    return 10.0 * (1.0 + math.sqrt(saturation))


def max_phase(emitter: EmitterParams, saturation: float, sign: int = 1, tol: float = 1e-10):
    """Largest |arg t| over detuning on one side of resonance.

    ``sign=+1`` searches positive detunings, ``-1`` negative ones.  Golden
    section on [0, 10 (1 + sqrt S)] linewidths.  Returns ``(phase, detuning)``
    with the signed phase found there.
    """
    bound = _search_bound(saturation)

    def objective(x):
        return abs(np.angle(transmission_t(emitter.eta, emitter.psi, sign * x, saturation)))

    x = golden_max(objective, 0.0, bound, tol)
    delta = sign * x
    return float(np.angle(transmission_t(emitter.eta, emitter.psi, delta, saturation))), delta


_INVPHI = (math.sqrt(5.0) - 1.0) / 2.0


def golden_max(f, a: float, b: float, tol: float = 1e-10) -> float:
    """Golden-section search for the maximum of a unimodal ``f`` on [a, b]."""
    c = b - _INVPHI * (b - a)
    d = a + _INVPHI * (b - a)
    fc, fd = f(c), f(d)
    while b - a > tol:
        if fc > fd:
            b, d, fd = d, c, fc
            c = b - _INVPHI * (b - a)
            fc = f(c)
        else:
            a, c, fc = c, d, fd
            d = a + _INVPHI * (b - a)
            fd = f(d)
    return 0.5 * (a + b)


@dataclass(frozen=True)
class SpectrumTable:
    detuning: np.ndarray
    t: np.ndarray
    phase: np.ndarray
    extinction: np.ndarray

    def __len__(self):
        return len(self.detuning)

    def fwhm(self) -> float:
        """Full width at half maximum of the extinction, linear interpolation."""
        return _fwhm(self.detuning, self.extinction)


def _fwhm(x, y) -> float:
    i_max = int(np.argmax(y))
    half = 0.5 * y[i_max]
    above = y >= half
    left = i_max
    while left > 0 and above[left - 1]:
        left -= 1
    right = i_max
    while right < len(y) - 1 and above[right + 1]:
        right += 1
    if left == 0 or right == len(y) - 1:
        raise EmptyGrid("grid does not contain both half-maximum crossings")
    xl = np.interp(half, [y[left - 1], y[left]], [x[left - 1], x[left]])
    xr = np.interp(half, [y[right + 1], y[right]], [x[right + 1], x[right]])
    return float(xr - xl)


def spectrum(emitter: EmitterParams, saturation: float, detuning_grid) -> SpectrumTable:
    grid = np.asarray(detuning_grid, dtype=float)
    if grid.ndim != 1 or grid.size == 0:
        raise EmptyGrid("detuning grid must be a nonempty 1-D sequence")
    if np.any(np.diff(grid) <= 0):
        raise EmptyGrid("detuning grid must be strictly increasing")
    ct = transmission(emitter, grid, saturation)
    t = np.atleast_1d(ct.t)
    return SpectrumTable(grid, t, np.atleast_1d(ct.phase), np.atleast_1d(ct.extinction))


def two_beam_observed_dip(single_beam_extinction):
    """Observed dip when only one of two equal-power beams is resonant."""
    x = np.asarray(single_beam_extinction, dtype=float)
    if np.any(x < 0) or np.any(x > 1):
        raise OutOfRange("single_beam_extinction", "must lie in [0, 1]")
    out = x / 2.0
    return float(out) if out.ndim == 0 else out


def on_resonance_extinction(eta, saturation):
    return 1.0 - (1.0 - np.asarray(eta) / (1.0 + np.asarray(saturation, dtype=float))) ** 2


@dataclass(frozen=True)
class SaturationTable:
    saturation: np.ndarray
    on_resonance_extinction: np.ndarray
    max_phase: np.ndarray
    max_phase_detuning: np.ndarray


def saturation_asymptotics(emitter: EmitterParams, saturations) -> SaturationTable:
    """On-resonance extinction and maximal |phase| for each saturation.

    Negative-detuning extrema are searched too when ``psi != 0``; the larger
    magnitude wins.
    """
    validate(emitter)
    s = np.asarray(saturations, dtype=float).ravel()
    if np.any(s <= 0):
        raise OutOfRange("saturation", "must be > 0")
    phases, deltas = [], []
    for si in s:
        phi, d = max_phase(emitter, si, sign=1)
        if emitter.psi != 0.0:
            phi2, d2 = max_phase(emitter, si, sign=-1)
            if abs(phi2) > abs(phi):
                phi, d = phi2, d2
        phases.append(abs(phi))
        deltas.append(d)
    return SaturationTable(s, on_resonance_extinction(emitter.eta, s), np.array(phases), np.array(deltas))


def loglog_slope(x, y) -> float:
    """Least-squares slope of log y against log x."""
    return float(np.polyfit(np.log(np.asarray(x, float)), np.log(np.asarray(y, float)), 1)[0])
