"""Raster images of a single emitter under lateral scanning of the focus.

The position dependence sits entirely in the coupling efficiency, which
follows the Gaussian amplitude overlap of the focal spot with the emitter.
Two beams straddle the resonance at -delta/2 and +delta/2.
"""
from __future__ import annotations

import csv
import json
import math
from dataclasses import asdict, dataclass

import numpy as np

from .core import EmitterParams, EmptyGrid, OutOfRange, validate
from .steadystate import transmission_t

DEFAULT_SPOT_FWHM_UM = 0.5
DEFAULT_PITCH_UM = 0.05


def eta_at(position, molecule_position, spot_fwhm: float, eta_peak: float):
    """Coupling efficiency with the focus at ``position`` (um)."""
    if not spot_fwhm > 0:
        raise OutOfRange("spot_fwhm", "must be > 0")
    p = np.asarray(position, dtype=float)
    m = np.asarray(molecule_position, dtype=float)
    r2 = np.sum((p - m) ** 2, axis=-1)
    out = eta_peak * np.exp(-4.0 * math.log(2.0) * r2 / spot_fwhm**2)
    return float(out) if np.ndim(out) == 0 else out


@dataclass(frozen=True)
class ScanGrid:
    x: np.ndarray  # um
    y: np.ndarray  # um

    def __post_init__(self):
        for name in ("x", "y"):
            axis = np.asarray(getattr(self, name), dtype=float)
            if axis.ndim != 1 or axis.size == 0:
                raise EmptyGrid(f"{name} axis must be a nonempty 1-D sequence")
            if axis.size > 1:
                steps = np.diff(axis)
                if np.any(steps <= 0) or not np.allclose(steps, steps[0], rtol=1e-9, atol=0):
                    raise EmptyGrid(f"{name} axis must be regular and increasing")
            object.__setattr__(self, name, axis)

    @classmethod
    def square(cls, half_width: float, pitch: float = DEFAULT_PITCH_UM, center=(0.0, 0.0)):
        n = int(round(half_width / pitch))
        ax = np.arange(-n, n + 1) * pitch
        return cls(ax + center[0], ax + center[1])

    def mesh(self):
        """(Y, X) mesh in row-major order: rows follow y, columns x."""
        xx, yy = np.meshgrid(self.x, self.y)
        return xx, yy


@dataclass(frozen=True)
class ImageSet:
    grid: ScanGrid
    eta: np.ndarray
    beat_phase: np.ndarray  # radians
    extinction_detuned: np.ndarray  # observed two-beam dip with both beams detuned
    extinction_resonant: np.ndarray  # single-beam dip on resonance
    phase_beam1: np.ndarray  # radians

    def to_csv(self, path) -> None:
        xx, yy = self.grid.mesh()
        with open(path, "w", newline="") as fh:
            writer = csv.writer(fh, lineterminator="\n")
            writer.writerow(["x_um", "y_um", "phase_deg", "extinction_detuned", "extinction_resonant"])
            for row in zip(xx.ravel(), yy.ravel(), np.degrees(self.beat_phase).ravel(),
                           self.extinction_detuned.ravel(), self.extinction_resonant.ravel()):
                writer.writerow([f"{row[0]:.6f}", f"{row[1]:.6f}"] + [f"{v:.10e}" for v in row[2:]])

    def peak_contrast(self):
        """Peak |beat phase| (rad), detuned and resonant extinction."""
        return (float(np.max(np.abs(self.beat_phase))), float(np.max(np.abs(self.extinction_detuned))),
                float(np.max(np.abs(self.extinction_resonant))))


def render_images(emitter: EmitterParams, molecule_position, grid: ScanGrid, delta_split: float,
                  saturation: float = 0.0, spot_fwhm: float = DEFAULT_SPOT_FWHM_UM,
                  psi_gradient: float = 0.0) -> ImageSet:
    """Phase-contrast and extinction rasters.

    The emitter resonance sits midway between the beams, so beam 1 sees
    detuning -delta/2 and beam 2 +delta/2.  ``emitter.eta`` is the peak
    coupling.  ``psi_gradient`` (rad/um) adds a radial geometric-phase slope.
    Every pixel is evaluated independently, so the result does not depend on
    evaluation order.
    """
    validate(emitter)
    xx, yy = grid.mesh()
    pos = np.stack([xx, yy], axis=-1)
    eta = eta_at(pos, molecule_position, spot_fwhm, emitter.eta)
    psi = emitter.psi
    if psi_gradient:
        r = np.sqrt(np.sum((pos - np.asarray(molecule_position, float)) ** 2, axis=-1))
        psi = psi + psi_gradient * r
    half = 0.5 * delta_split
    t1 = transmission_t(eta, psi, -half, saturation)
    t2 = transmission_t(eta, psi, half, saturation)
    t0 = transmission_t(eta, psi, 0.0, saturation)
    beat = np.angle(t1 * np.conj(t2))
    ext_detuned = 1.0 - 0.5 * (np.abs(t1) ** 2 + np.abs(t2) ** 2)
    ext_resonant = 1.0 - np.abs(t0) ** 2
    return ImageSet(grid, eta, beat, ext_detuned, ext_resonant, np.angle(t1))


def _phase_over_extinction(eta, psi, delta, saturation=0.0):
    t = transmission_t(eta, psi, delta, saturation)
    return abs(float(np.angle(t))) / float(1.0 - abs(t) ** 2)


def contrast_ratio(emitter: EmitterParams, delta: float, saturation: float = 0.0) -> float:
    """|phase| (rad) over extinction for one beam at ``delta`` linewidths.

    In the line wings this tends to (Delta / Gamma) * 2 / (2 - eta), so it
    approaches Delta / Gamma for weak coupling.  Only defined in the wings,
    |delta| >= 2.
    """
    validate(emitter)
    if abs(delta) < 2.0:
        raise OutOfRange("delta", "contrast ratio is defined for |delta| >= 2 linewidths")
    return _phase_over_extinction(emitter.eta, emitter.psi, delta, saturation)


def phase_extinction_crossover(emitter: EmitterParams, lo: float = 0.3, hi: float = 3.0) -> float:
    """Detuning where |phase| (rad) equals the extinction (bisection)."""
    validate(emitter)

    def g(d):
        return _phase_over_extinction(emitter.eta, emitter.psi, d) - 1.0

    if g(lo) * g(hi) > 0:
        raise OutOfRange("delta", "no crossover inside the bracket")
    for _ in range(200):
        mid = 0.5 * (lo + hi)
        if g(lo) * g(mid) <= 0:
            hi = mid
        else:
            lo = mid
        if hi - lo < 1e-12:
            break
    return 0.5 * (lo + hi)


def write_metadata(path, **params) -> None:
    def default(o):
        if isinstance(o, np.ndarray):
            return o.tolist()
        if hasattr(o, "__dataclass_fields__"):
            return asdict(o)
        raise TypeError(type(o))

    with open(path, "w") as fh:
        json.dump(params, fh, indent=2, sort_keys=True, default=default)
        fh.write("\n")
