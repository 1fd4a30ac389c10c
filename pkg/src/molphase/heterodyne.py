"""Photon-counting simulation of the heterodyne beat measurement.

Beat intensity -> inhomogeneous Poisson arrivals (thinning) -> detector
jitter -> start-stop histogram folded on the beat period -> sinusoid fit.
Times are in seconds internally; frequencies in MHz and jitter in ps at
the configuration boundary.
"""
from __future__ import annotations

import csv
import math
from dataclasses import dataclass, replace

import numpy as np

from .core import EmitterParams, MolphaseError, OutOfRange, validate
from . import steadystate


class Empty(MolphaseError, ValueError):
    pass


class DegenerateFit(MolphaseError):
    pass


@dataclass(frozen=True)
class DetectionConfig:
    beat_frequency: float = 114.3  # MHz
    mean_count_rate: float = 1e6  # counts / s
    duration: float = 1.0  # s
    bins: int = 64  # per beat period
    jitter_sigma: float = 0.0  # ps, Gaussian
    seed: int = 0
    dark_count_rate: float = 0.0  # counts / s, flat
    shards: int = 1

    def __post_init__(self):
        if self.bins < 8:
            raise OutOfRange("bins", "need at least 8 bins per period")
        for name in ("beat_frequency", "mean_count_rate", "duration", "jitter_sigma", "dark_count_rate"):
            if not getattr(self, name) >= 0:
                raise OutOfRange(name, "must be >= 0")
        if self.beat_frequency == 0:
            raise OutOfRange("beat_frequency", "must be > 0")
        if not 0 <= self.seed < 2**64:
            raise OutOfRange("seed", "must be a 64-bit unsigned integer")
        if self.shards < 1:
            raise OutOfRange("shards", "must be >= 1")

    @property
    def period(self) -> float:
        return 1e-6 / self.beat_frequency

    def with_seed(self, seed) -> "DetectionConfig":
        return replace(self, seed=int(seed))


@dataclass(frozen=True)
class BeatIntensity:
    """I(t) = mean + amplitude cos(2 pi f t + phase), normalized to unit beam power."""

    mean: float
    amplitude: float
    phase: float
    frequency: float  # Hz

    @property
    def visibility(self) -> float:
        return self.amplitude / self.mean if self.mean > 0 else 0.0

    @property
    def maximum(self) -> float:
        return self.mean + self.amplitude

    def __call__(self, t):
        cycles = self.frequency * np.asarray(t)
        cycles = cycles - np.floor(cycles)
        return self.mean + self.amplitude * np.cos(2 * math.pi * cycles + self.phase)


def synthesize_intensity(t1: complex, t2: complex, config: DetectionConfig) -> BeatIntensity:
    """Beat of two equal-power beams transmitted with amplitudes ``t1``, ``t2``."""
    if abs(t1) > 1 + 1e-12 or abs(t2) > 1 + 1e-12:
        raise OutOfRange("t", "transmission magnitudes must not exceed 1")
    mean = 0.5 * (abs(t1) ** 2 + abs(t2) ** 2)
    return BeatIntensity(mean, abs(t1) * abs(t2), float(np.angle(t1 * np.conj(t2))),
                         config.beat_frequency * 1e6)


def _shard_arrivals(intensity: BeatIntensity, rate: float, t0: float, t1: float, dark: float, jitter_s: float, rng):
    span = t1 - t0
    peak = rate * intensity.maximum / intensity.mean if intensity.mean > 0 else 0.0
    n_cand = rng.poisson(peak * span) if peak > 0 else 0
    cand = t0 + span * rng.random(n_cand)
    keep = rng.random(n_cand) * intensity.maximum < intensity(cand)
    arrivals = cand[keep]
    if dark > 0:
        arrivals = np.concatenate([arrivals, t0 + span * rng.random(rng.poisson(dark * span))])
    if jitter_s > 0:
        arrivals = arrivals + rng.normal(0.0, jitter_s, arrivals.size)
    return arrivals


def sample_photons(intensity: BeatIntensity, config: DetectionConfig) -> np.ndarray:
    """Photon arrival times (s), sorted.

    Arrivals follow a Poisson process whose rate is ``mean_count_rate``
    scaled by I(t)/mean(I), drawn by thinning against the intensity maximum.
    The duration is split into ``shards`` pieces, each with its own child of
    ``SeedSequence(seed)``, so the result depends on the seed and shard
    count only.
    """
    children = np.random.SeedSequence(config.seed).spawn(config.shards)
    edges = np.linspace(0.0, config.duration, config.shards + 1)
    parts = [
        _shard_arrivals(intensity, config.mean_count_rate, edges[k], edges[k + 1],
                        config.dark_count_rate, config.jitter_sigma * 1e-12, np.random.default_rng(children[k]))
        for k in range(config.shards)
    ]
    return np.sort(np.concatenate(parts)) if parts else np.empty(0)


@dataclass(frozen=True)
class Histogram:
    bin_edges: np.ndarray  # s, within one period
    counts: np.ndarray

    @property
    def bin_centers(self):
        return 0.5 * (self.bin_edges[:-1] + self.bin_edges[1:])

    @property
    def total(self) -> int:
        return int(self.counts.sum())

    def to_csv(self, path) -> None:
        with open(path, "w", newline="") as fh:
            writer = csv.writer(fh, lineterminator="\n")
            writer.writerow(["bin_center_ps", "counts"])
            for c, n in zip(self.bin_centers * 1e12, self.counts):
                writer.writerow([f"{c:.6f}", int(n)])


def start_stop_histogram(arrivals, config: DetectionConfig) -> Histogram:
    """Fold arrival times on the beat period (ideal reference clock at t = 0)."""
    arrivals = np.asarray(arrivals, dtype=float)
    if arrivals.size == 0:
        raise Empty("no photon arrivals to histogram")
    period = config.period
    cycles = arrivals / period
    phase = cycles - np.floor(cycles)
    # arrivals within 1e-9 of a period boundary belong to the next period
    phase[phase > 1.0 - 1e-9] = 0.0
    idx = np.minimum((phase * config.bins).astype(np.int64), config.bins - 1)
    counts = np.bincount(idx, minlength=config.bins)
    return Histogram(np.linspace(0.0, period, config.bins + 1), counts)


@dataclass(frozen=True)
class BeatFit:
    offset: float  # counts per bin
    amplitude: float
    phase: float  # radians
    visibility: float
    offset_err: float
    amplitude_err: float
    phase_err: float
    visibility_err: float
    counts: int


def fit_beat(histogram: Histogram, config: DetectionConfig, min_counts: int = 1000) -> BeatFit:
    """Least-squares fit of a + b cos(2 pi t / T + phi) to a folded histogram.

    The model is integrated over each bin (a factor sinc(pi / bins) on the
    modulation), which makes the fit linear in (a, b cos phi, b sin phi).
    Uncertainties use the shot-noise result sqrt(2 / N) / V for the phase.
    """
    n_total = histogram.total
    if n_total < min_counts:
        raise Empty(f"only {n_total} counts; need at least {min_counts}")
    m = histogram.counts.size
    x = 2 * math.pi * (np.arange(m) + 0.5) / m
    width = math.pi / m
    sinc = math.sin(width) / width
    design = np.column_stack([np.ones(m), sinc * np.cos(x), -sinc * np.sin(x)])
    coef, *_ = np.linalg.lstsq(design, histogram.counts.astype(float), rcond=None)
    a, p, q = coef
    b = math.hypot(p, q)
    phi = math.atan2(q, p)
    vis = b / a if a > 0 else 0.0
    rel = math.sqrt(2.0 / n_total)
    phase_err = rel / vis if vis > 0 else math.inf
    vis_err = rel
    fit = BeatFit(a, b, phi, vis, math.sqrt(a / m), rel * a, phase_err, vis_err, n_total)
    if vis < 3.0 * vis_err:
        raise DegenerateFit(f"visibility {vis:.3g} not resolved (uncertainty {vis_err:.2g})")
    return fit


def jitter_attenuation(beat_frequency_mhz: float, jitter_ps: float) -> float:
    """Visibility factor exp(-(2 pi f sigma)^2 / 2) from Gaussian timing jitter."""
    x = 2 * math.pi * beat_frequency_mhz * 1e6 * jitter_ps * 1e-12
    return math.exp(-0.5 * x * x)


def measure_beat(t1: complex, t2: complex, config: DetectionConfig) -> BeatFit:
    intensity = synthesize_intensity(t1, t2, config)
    return fit_beat(start_stop_histogram(sample_photons(intensity, config), config), config)


@dataclass(frozen=True)
class PhaseSpectrum:
    detuning: np.ndarray  # molecular detuning of the midpoint between beams, linewidths
    phase: np.ndarray  # measured beat phase, radians
    phase_err: np.ndarray
    visibility: np.ndarray
    true_phase: np.ndarray  # noiseless arg(t1 t2*)


def end_to_end_phase(emitter: EmitterParams, detunings, delta_split: float, saturation: float,
                     config: DetectionConfig, floquet_threshold: float = 0.1) -> PhaseSpectrum:
    """Simulated beat-phase spectrum as the laser pair is tuned.

    ``detunings`` place the emitter relative to the beam midpoint (linewidth
    units): beam 1 sits at d - delta/2, beam 2 at d + delta/2.  Above
    ``floquet_threshold`` in saturation the per-beam transmissions come from
    the two-tone solution, otherwise from the closed form.  Each point draws
    photons with its own child seed.
    """
    validate(emitter)
    det = np.asarray(detunings, dtype=float)
    d1 = det - 0.5 * delta_split
    if saturation > floquet_threshold:
        from .floquet import BichromaticDrive, single_beam_scan

        drive = BichromaticDrive.from_saturation(saturation, saturation, delta_split, 0.0)
        t1, t2 = single_beam_scan(emitter, drive, d1)
    else:
        t1 = steadystate.transmission_t(emitter.eta, emitter.psi, d1, saturation)
        t2 = steadystate.transmission_t(emitter.eta, emitter.psi, d1 + delta_split, saturation)
    seeds = np.random.SeedSequence(config.seed).generate_state(det.size, dtype=np.uint64)
    phase, err, vis = [], [], []
    for k in range(det.size):
        fit = measure_beat(complex(t1[k]), complex(t2[k]), config.with_seed(seeds[k]))
        phase.append(fit.phase)
        err.append(fit.phase_err)
        vis.append(fit.visibility)
    return PhaseSpectrum(det, np.array(phase), np.array(err), np.array(vis), np.angle(t1 * np.conj(t2)))
