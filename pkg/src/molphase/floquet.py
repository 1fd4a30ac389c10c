"""Two-tone driving of a two-level emitter by Fourier-harmonic expansion.

Beam 1 (Rabi frequency Omega1, detuning Delta1) defines the rotating frame;
beam 2 sits ``delta`` above it.  In that frame the drive is
Omega(t) = Omega1 + Omega2 exp(-i delta t), and the periodic steady state
is expanded as x(t) = sum_n x_n exp(i n delta t) for x in (w, coh, conj coh).
Beam 2's linear response therefore lives in the n = -1 harmonic.

Equations (linewidth units, Gamma = 1), harmonic n:

    (i Delta - 1/2 - i n delta) c_n + (i/2)(Omega1 w_n + Omega2 w_{n+1}) = 0
    (-i Delta - 1/2 - i n delta) d_n - (i/2)(Omega1 w_n + Omega2 w_{n-1}) = 0
    (-1 - i n delta) w_n + i(Omega1 c_n + Omega2 c_{n-1})
                         - i(Omega1 d_n + Omega2 d_{n+1}) = -[n == 0]

Coupling only reaches neighbouring harmonics, so the truncated system is
block tridiagonal with 3x3 blocks ordered (w, c, d).
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .blocktri import SingularBlock, solve_block_tridiagonal
from .core import EmitterParams, MolphaseError, OutOfRange, rabi_from_saturation, validate

DEFAULT_N = 8
MAX_N = 64
CONVERGENCE_TOL = 1e-6


class SingularSystem(MolphaseError):
    pass


class NotConverged(MolphaseError):
    pass


class NotFound(MolphaseError):
    pass


class IllConditioned(MolphaseError):
    pass


@dataclass(frozen=True)
class BichromaticDrive:
    """Two beams split by ``delta_split``; all quantities in linewidths."""

    rabi1: float
    rabi2: float
    delta_split: float
    detuning1: float

    def __post_init__(self):
        if self.delta_split == 0:
            raise OutOfRange("delta_split", "beam splitting must be nonzero")
        if self.rabi1 < 0 or self.rabi2 < 0:
            raise OutOfRange("rabi", "Rabi frequencies must be >= 0")

    @classmethod
    def from_saturation(cls, s1: float, s2: float, delta_split: float, detuning1: float):
        return cls(float(rabi_from_saturation(s1)), float(rabi_from_saturation(s2)),
                   delta_split, detuning1)

    @property
    def detuning2(self) -> float:
        return self.detuning1 + self.delta_split

    def with_detuning(self, detuning1: float) -> "BichromaticDrive":
        return BichromaticDrive(self.rabi1, self.rabi2, self.delta_split, detuning1)


@dataclass(frozen=True)
class HarmonicSet:
    """Solved Fourier components, indexed by ``n = -N..N`` (``index(n)``)."""

    N: int
    w: np.ndarray
    coh: np.ndarray
    coh_conj: np.ndarray
    intensity: np.ndarray  # I_k for k = -2N-1 .. 2N+1, see detector_field
    ac_stark_shift: float
    delta_split: float

    @property
    def orders(self):
        return np.arange(-self.N, self.N + 1)

    def index(self, n: int) -> int:
        if abs(n) > self.N:
            raise IndexError(n)
        return n + self.N

    def c(self, n: int) -> complex:
        return complex(self.coh[self.index(n)]) if abs(n) <= self.N else 0j

    def intensity_harmonic(self, k: int) -> complex:
        K = (self.intensity.size - 1) // 2
        return complex(self.intensity[k + K]) if abs(k) <= K else 0j

    def tail_ratio(self) -> float:
        scale = max(np.max(np.abs(self.coh)), np.max(np.abs(self.w)))
        edge = max(abs(self.coh[0]), abs(self.coh[-1]), abs(self.w[0]), abs(self.w[-1]))
        return float(edge / scale) if scale > 0 else 0.0

    def reconstruct(self, times):
        """Time series (w, coh, intensity) at ``times`` (in lifetimes)."""
        times = np.asarray(times, dtype=float)
        ph = np.exp(1j * self.delta_split * np.outer(times, self.orders))
        K = (self.intensity.size - 1) // 2
        ph_i = np.exp(1j * self.delta_split * np.outer(times, np.arange(-K, K + 1)))
        return ph @ self.w, ph @ self.coh, ph_i @ self.intensity


def _blocks(drive: BichromaticDrive, N: int, detuning1=None):
    """Block arrays; ``detuning1`` may be an array to build a batch of systems."""
    n = np.arange(-N, N + 1)
    d1 = np.asarray(drive.detuning1 if detuning1 is None else detuning1, dtype=float)[..., None]
    r1, r2, dl = drive.rabi1, drive.rabi2, drive.delta_split
    shape = d1.shape[:-1] + (n.size, 3, 3)
    diag = np.zeros(shape, dtype=complex)
    diag[..., 0, 0] = -1.0 - 1j * n * dl
    diag[..., 0, 1] = 1j * r1
    diag[..., 0, 2] = -1j * r1
    diag[..., 1, 0] = 0.5j * r1
    diag[..., 1, 1] = 1j * d1 - 0.5 - 1j * n * dl
    diag[..., 2, 0] = -0.5j * r1
    diag[..., 2, 2] = -1j * d1 - 0.5 - 1j * n * dl
    upper = np.zeros(shape, dtype=complex)
    upper[..., 0, 2] = -1j * r2
    upper[..., 1, 0] = 0.5j * r2
    lower = np.zeros(shape, dtype=complex)
    lower[..., 0, 1] = 1j * r2
    lower[..., 2, 0] = -0.5j * r2
    rhs = np.zeros(shape[:-1], dtype=complex)
    rhs[..., N, 0] = -1.0
    return lower, diag, upper, rhs


def detector_field(coh, N: int, eta: float, psi: float, rabi1: float, rabi2: float):
    """Field harmonics a_n (n = -N..N) on the detector, in Rabi-frequency units."""
    a = 1j * eta * np.exp(-1j * psi) * np.asarray(coh, dtype=complex)
    a = a.copy()
    a[N] += rabi1
    a[N - 1] += rabi2
    return a


def intensity_harmonics(a):
    """I_k = sum_m a_{m+k} conj(a_m) for k = -(2N)..2N."""
    return np.correlate(a, a, mode="full")


def ac_stark_estimate(drive: BichromaticDrive) -> float:
    """Dispersive light shift of the transition summed over both beams.

    Each beam at detuning D moves the transition by
    -sign(D) (sqrt(D^2 + Omega^2) - |D|): away from the laser.
    """
    shift = 0.0
    for det, rabi in ((drive.detuning1, drive.rabi1), (drive.detuning2, drive.rabi2)):
        shift -= math.copysign(1.0, det) * (math.hypot(det, rabi) - abs(det)) if det else 0.0
    return shift


def _solve_fixed(emitter: EmitterParams, drive: BichromaticDrive, N: int) -> HarmonicSet:
    lower, diag, upper, rhs = _blocks(drive, N)
    try:
        x = solve_block_tridiagonal(lower, diag, upper, rhs)
    except (SingularBlock, np.linalg.LinAlgError) as exc:
        raise SingularSystem(f"truncated Floquet system singular at N={N}") from exc
    w, c, d = x[:, 0], x[:, 1], x[:, 2]
    a = detector_field(c, N, emitter.eta, emitter.psi, drive.rabi1, drive.rabi2)
    return HarmonicSet(N, w, c, d, intensity_harmonics(a), ac_stark_estimate(drive), drive.delta_split)


def solve_harmonics(emitter: EmitterParams, drive: BichromaticDrive, N: int | None = None,
                    auto: bool = True) -> HarmonicSet:
    """Periodic steady state of the two-tone Bloch equations.

    With ``auto`` the truncation starts at ``N`` (default 8) and doubles until
    the outermost harmonics fall below 1e-6 of the largest, up to N = 64.
    """
    validate(emitter)
    N = DEFAULT_N if N is None else int(N)
    if N < 1:
        raise OutOfRange("N", "truncation must be >= 1")
    while True:
        hs = _solve_fixed(emitter, drive, N)
        if not auto or hs.tail_ratio() < CONVERGENCE_TOL:
            return hs
        if N >= MAX_N:
            raise NotConverged(f"harmonics not converged at N={N} (tail ratio {hs.tail_ratio():.2e})")
        N = min(2 * N, MAX_N)


@dataclass(frozen=True)
class BeatSignal:
    harmonics: np.ndarray  # I_k, k = -K..K
    beat_phase: float  # radians, arg I_1
    beat_amplitude: float  # 2 |I_1|
    mean_intensity: float  # I_0
    visibility: float  # 2 |I_1| / I_0
    observed_extinction: float  # 1 - I_0 / (Omega1^2 + Omega2^2)


def detector_harmonics(harmonics: HarmonicSet, emitter: EmitterParams, drive: BichromaticDrive) -> BeatSignal:
    """Beat-note observables of the detected intensity.

    The detected power oscillates as I_0 + 2|I_1| cos(delta t + arg I_1) + ...;
    in the weak-field limit arg I_1 equals phi1 - phi2.
    """
    I = harmonics.intensity
    K = (I.size - 1) // 2
    i0 = float(I[K].real)
    i1 = complex(I[K + 1])
    ref = drive.rabi1**2 + drive.rabi2**2
    return BeatSignal(
        harmonics=I.copy(),
        beat_phase=float(np.angle(i1)),
        beat_amplitude=2.0 * abs(i1),
        mean_intensity=i0,
        visibility=2.0 * abs(i1) / i0 if i0 > 0 else 0.0,
        observed_extinction=1.0 - i0 / ref if ref > 0 else 0.0,
    )


@dataclass(frozen=True)
class BeamObservables:
    t: complex
    phase: float  # radians
    extinction: float


def corrected_single_beam(harmonics: HarmonicSet, emitter: EmitterParams, drive: BichromaticDrive):
    """Equivalent single-beam transmissions recovered from the two-tone solution.

    Beam 1 is read off the n = 0 coherence and beam 2 off n = -1, each
    normalized by its own Rabi frequency.
    """
    out = []
    for rabi, n in ((drive.rabi1, 0), (drive.rabi2, -1)):
        if rabi <= 0:
            raise IllConditioned("cannot normalize the response of a beam with zero Rabi frequency")
        scattered = 1j * emitter.eta * np.exp(-1j * emitter.psi) * harmonics.c(n) / rabi
        if emitter.eta > 0 and abs(scattered) < 1e-13:
            raise IllConditioned("scattered amplitude below solver precision")
        t = 1.0 + scattered
        out.append(BeamObservables(complex(t), float(np.angle(t)), float(1.0 - abs(t) ** 2)))
    return tuple(out)


def _tail_ratio(w, c):
    scale = np.maximum(np.max(np.abs(c), axis=-1), np.max(np.abs(w), axis=-1))
    edge = np.max(np.abs(np.stack([c[..., 0], c[..., -1], w[..., 0], w[..., -1]])), axis=0)
    return np.where(scale > 0, edge / np.where(scale > 0, scale, 1.0), 0.0)


def solve_harmonics_scan(emitter: EmitterParams, drive: BichromaticDrive, detunings, N: int | None = None):
    """Solve a whole grid of ``detuning1`` values at once.

    Returns ``(N, w, coh)`` with arrays of shape (len(detunings), 2N+1).
    Truncation doubles until every grid point satisfies the tail criterion.
    """
    validate(emitter)
    N = DEFAULT_N if N is None else int(N)
    det = np.asarray(detunings, dtype=float)
    while True:
        lower, diag, upper, rhs = _blocks(drive, N, det)
        try:
            x = solve_block_tridiagonal(lower, diag, upper, rhs)
        except (SingularBlock, np.linalg.LinAlgError) as exc:
            raise SingularSystem(f"truncated Floquet system singular at N={N}") from exc
        w, c = x[..., 0], x[..., 1]
        worst = float(np.max(_tail_ratio(w, c))) if det.size else 0.0
        if worst < CONVERGENCE_TOL:
            return N, w, c
        if N >= MAX_N:
            raise NotConverged(f"harmonics not converged at N={N} (tail ratio {worst:.2e})")
        N = min(2 * N, MAX_N)


def single_beam_scan(emitter: EmitterParams, drive: BichromaticDrive, detunings, N: int | None = None):
    """Per-beam transmissions (t1, t2) over a grid of beam-1 detunings."""
    N, _, c = solve_harmonics_scan(emitter, drive, detunings, N)
    if drive.rabi1 <= 0 or drive.rabi2 <= 0:
        raise IllConditioned("both beams need a nonzero Rabi frequency")
    k = 1j * emitter.eta * np.exp(-1j * emitter.psi)
    return 1.0 + k * c[..., N] / drive.rabi1, 1.0 + k * c[..., N - 1] / drive.rabi2


def beat_scan(emitter: EmitterParams, drive: BichromaticDrive, detunings, N: int | None = None):
    """Detector observables over a grid of beam-1 detunings.

    Returns ``(beat_phase, observed_extinction, visibility)`` arrays.
    """
    N, _, c = solve_harmonics_scan(emitter, drive, detunings, N)
    a = 1j * emitter.eta * np.exp(-1j * emitter.psi) * c
    a[..., N] += drive.rabi1
    a[..., N - 1] += drive.rabi2
    i0 = np.sum(np.abs(a) ** 2, axis=-1)
    i1 = np.sum(a[..., 1:] * np.conj(a[..., :-1]), axis=-1)
    ref = drive.rabi1**2 + drive.rabi2**2
    return np.angle(i1), 1.0 - i0 / ref, 2.0 * np.abs(i1) / i0


@dataclass(frozen=True)
class HyperRamanScan:
    detuning: np.ndarray
    four_wave: np.ndarray  # |coh_{+1}|, the coherence at 2 w1 - w2
    probe: np.ndarray  # |coh_{-1}|
    pump: np.ndarray  # |coh_0|
    position: float  # detuning1 of the feature
    weak_position: float  # same feature for vanishing drive
    ac_stark_shift: float  # position - weak_position
    strength: float  # |coh_{+1}| / |coh_0| at the feature


def _parabolic_peak(x, y):
    k = int(np.argmax(y))
    if k == 0 or k == len(y) - 1:
        return None
    y0, y1, y2 = y[k - 1], y[k], y[k + 1]
    denom = y0 - 2.0 * y1 + y2
    off = 0.5 * (y0 - y2) / denom if denom != 0 else 0.0
    return float(x[k] + off * (x[k + 1] - x[k])), k


def hyper_raman_scan(emitter: EmitterParams, drive: BichromaticDrive, detunings=None,
                     threshold: float = 1e-3, weak_scale: float = 1e-3) -> HyperRamanScan:
    """Locate the two-photon (hyper-Raman) resonance as beam 1 is tuned.

    Two beam-1 photons feed the emitter coherence at 2 w1 - w2, which peaks
    when that frequency meets the light-shifted transition, i.e. near
    detuning1 = delta_split + shift.  The feature is tracked in |coh_{+1}|;
    its argmax (parabolic refinement) is compared with the same scan at
    ``weak_scale`` times the Rabi frequencies, and the displacement is
    reported as the AC Stark shift.  ``threshold`` applies to
    |coh_{+1}| / |coh_0| at the feature: below it the effect is deemed absent.
    """
    validate(emitter)
    dl = drive.delta_split
    if detunings is None:
        est = ac_stark_estimate(drive.with_detuning(dl))
        half = 1.5 + 3.0 * abs(est)
        detunings = dl + est + np.linspace(-half, half, 1201)
    det = np.asarray(detunings, dtype=float)

    N, _, c = solve_harmonics_scan(emitter, drive, det)
    four_wave = np.abs(c[:, N + 1])
    found = _parabolic_peak(det, four_wave)
    if found is None:
        raise NotFound("no interior maximum of the 2w1 - w2 coherence in the scan window")
    position, k = found
    pump = np.abs(c[:, N])
    strength = float(four_wave[k] / pump[k]) if pump[k] > 0 else 0.0
    if strength < threshold:
        raise NotFound(f"feature strength {strength:.2e} below threshold {threshold:.1e}")

    weak = BichromaticDrive(drive.rabi1 * weak_scale, drive.rabi2 * weak_scale, dl, drive.detuning1)
    wide = dl + np.linspace(-2.0, 2.0, 2001)
    Nw, _, cw = solve_harmonics_scan(emitter, weak, wide)
    weak_found = _parabolic_peak(wide, np.abs(cw[:, Nw + 1]))
    if weak_found is None:
        raise NotFound("weak-field reference feature not located")
    weak_position = weak_found[0]
    return HyperRamanScan(det, four_wave, np.abs(c[:, N - 1]), pump, position, weak_position,
                          position - weak_position, strength)
