"""Time-domain optical Bloch equations for a two-level emitter.

Units: detuning and Rabi frequency in linewidths, time in lifetimes.  The
state is (w, coh) with w = rho_gg - rho_ee and coh = rho_eg in the frame
rotating at the laser frequency:

    d coh / dt = (i Delta - 1/2) coh + i (Omega / 2) w
    d w / dt   = (1 - w) - 2 Omega Im(coh)

With this sign choice the steady-state coherence is
i (Omega/2)(1/2 + i Delta) / (Delta^2 + 1/4 + Omega^2 / 2) and the
transmitted field is t = 1 + i eta exp(-i psi) coh / Omega.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .core import ComplexTransmission, EmitterParams, MolphaseError, OutOfRange, validate


class StepTooLarge(MolphaseError):
    pass


class ScheduleInvalid(MolphaseError, ValueError):
    pass


class ZeroDrive(MolphaseError, ValueError):
    pass


# Step-size ceiling in normalized units: dt <= min(1/200, 0.05/|Delta|, 0.05/Omega).
MAX_DT = 1.0 / 200.0
PHASE_PER_STEP = 0.05


def max_step(detuning_max: float, rabi: float) -> float:
    limits = [MAX_DT]
    if detuning_max:
        limits.append(PHASE_PER_STEP / abs(detuning_max))
    if rabi:
        limits.append(PHASE_PER_STEP / abs(rabi))
    return min(limits)


@dataclass(frozen=True)
class BlochState:
    w: float | np.ndarray = 1.0
    coh: complex | np.ndarray = 0j

    @property
    def excited_population(self):
        return (1.0 - np.asarray(self.w)) / 2.0

    @property
    def purity(self):
        """Squared Bloch-vector length w^2 + 4|coh|^2 (1 for a pure state)."""
        return np.asarray(self.w) ** 2 + 4.0 * np.abs(self.coh) ** 2


GROUND = BlochState(1.0, 0j)


def steady_state(detuning, rabi) -> BlochState:
    detuning = np.asarray(detuning, dtype=float)
    rabi = np.asarray(rabi, dtype=float)
    denom = detuning**2 + 0.25 + rabi**2 / 2.0
    coh = 0.5j * rabi * (0.5 + 1j * detuning) / denom
    w = (detuning**2 + 0.25) / denom
    if coh.ndim == 0:
        return BlochState(float(w), complex(coh))
    return BlochState(w, coh)


def _rhs(w, coh, detuning, rabi):
    dcoh = (1j * detuning - 0.5) * coh + 0.5j * rabi * w
    dw = (1.0 - w) - 2.0 * rabi * coh.imag
    return dw, dcoh


def _rk4(w, coh, t, dt, detuning_at, rabi):
    d0 = detuning_at(t)
    dh = detuning_at(t + 0.5 * dt)
    d1 = detuning_at(t + dt)
    k1w, k1c = _rhs(w, coh, d0, rabi)
    k2w, k2c = _rhs(w + 0.5 * dt * k1w, coh + 0.5 * dt * k1c, dh, rabi)
    k3w, k3c = _rhs(w + 0.5 * dt * k2w, coh + 0.5 * dt * k2c, dh, rabi)
    k4w, k4c = _rhs(w + dt * k3w, coh + dt * k3c, d1, rabi)
    w = w + dt / 6.0 * (k1w + 2.0 * k2w + 2.0 * k3w + k4w)
    coh = coh + dt / 6.0 * (k1c + 2.0 * k2c + 2.0 * k3c + k4c)
    return w, coh


def _check_step(dt, detuning_max, rabi):
    if not dt > 0:
        raise StepTooLarge("dt must be > 0")
    limit = max_step(float(np.max(np.abs(detuning_max))), float(np.max(np.abs(rabi))))
    if dt > limit * (1.0 + 1e-9):
        raise StepTooLarge(f"dt={dt:g} exceeds the step ceiling {limit:g} for this drive")


def obe_step(state: BlochState, detuning, rabi, dt: float) -> BlochState:
    """Advance one classic RK4 step at constant detuning.

    Works elementwise on array-valued states, so a batch of independent
    emitters can be stepped together.
    """
    _check_step(dt, detuning, rabi)
    w = np.asarray(state.w, dtype=float)
    coh = np.asarray(state.coh, dtype=complex)
    w, coh = _rk4(w, coh, 0.0, dt, lambda _t: detuning, rabi)
    if w.ndim == 0:
        return BlochState(float(w), complex(coh))
    return BlochState(w, coh)


def integrate(state: BlochState, detuning, rabi, t_end: float, dt: float) -> BlochState:
    """Constant-detuning evolution over ``t_end`` with steps no longer than ``dt``."""
    if not dt > 0:
        raise StepTooLarge("dt must be > 0")
    n = max(1, math.ceil(t_end / dt - 1e-12))
    h = t_end / n
    _check_step(h, detuning, rabi)
    w = np.asarray(state.w, dtype=float)
    coh = np.asarray(state.coh, dtype=complex)
    detuning = np.asarray(detuning, dtype=float)
    for _ in range(n):
        w, coh = _rk4(w, coh, 0.0, h, lambda _t: detuning, rabi)
    if w.ndim == 0:
        return BlochState(float(w), complex(coh))
    return BlochState(w, coh)


def transient_transmission(state: BlochState, emitter: EmitterParams, rabi) -> ComplexTransmission:
    """Instantaneous transmission carried by the coherent scattered field."""
    rabi = np.asarray(rabi, dtype=float)
    if np.any(rabi <= 0):
        raise ZeroDrive("transmission is undefined without a probing field")
    t = 1.0 + 1j * emitter.eta * np.exp(-1j * emitter.psi) * np.asarray(state.coh) / rabi
    if np.ndim(t) == 0:
        t = complex(t)
    return ComplexTransmission(t)


@dataclass(frozen=True)
class DetuningSchedule:
    """Piecewise-constant detuning with optional linear edges.

    ``segments`` is a sequence of ``(start_time, detuning)``; the first
    segment starts at 0.  With ``rise_time > 0`` each change is a linear ramp
    that begins at the segment start.
    """

    segments: tuple
    rise_time: float = 0.0
    starts: np.ndarray = field(init=False, repr=False)
    values: np.ndarray = field(init=False, repr=False)

    def __post_init__(self):
        segs = tuple((float(a), float(b)) for a, b in self.segments)
        if not segs:
            raise ScheduleInvalid("schedule needs at least one segment")
        starts = np.array([s for s, _ in segs])
        if starts[0] != 0.0:
            raise ScheduleInvalid("first segment must start at t = 0")
        if np.any(np.diff(starts) <= 0):
            raise ScheduleInvalid("segment start times must be strictly increasing")
        if self.rise_time < 0:
            raise ScheduleInvalid("rise_time must be >= 0")
        if self.rise_time > 0 and len(starts) > 1 and np.min(np.diff(starts)) < self.rise_time:
            raise ScheduleInvalid("rise_time longer than a segment")
        object.__setattr__(self, "segments", segs)
        object.__setattr__(self, "starts", starts)
        object.__setattr__(self, "values", np.array([d for _, d in segs]))

    @classmethod
    def constant(cls, detuning: float) -> "DetuningSchedule":
        return cls(((0.0, detuning),))

    @classmethod
    def from_bits(cls, bits, low: float, high: float, bit_period: float = 2.0,
                  pulse_width: float = 1.0, lead: float = 1.0, rise_time: float = 0.0):
        """Logic pulse train: detuning ``high`` at rest, ``low`` while a 1-bit is on."""
        if not 0 < pulse_width < bit_period:
            raise ScheduleInvalid("pulse_width must lie in (0, bit_period)")
        segs = [(0.0, high)]
        for k, bit in enumerate(bits):
            if int(bit) not in (0, 1):
                raise ScheduleInvalid(f"bit {bit!r} is not 0 or 1")
            if int(bit):
                t0 = lead + k * bit_period
                segs.append((t0, low))
                segs.append((t0 + pulse_width, high))
        return cls(tuple(segs), rise_time=rise_time)

    def duration_hint(self, tail: float = 1.0) -> float:
        return float(self.starts[-1] + tail)

    def __call__(self, t):
        idx = np.searchsorted(self.starts, t, side="right") - 1
        idx = np.maximum(idx, 0)
        value = self.values[idx]
        if self.rise_time > 0:
            prev = self.values[np.maximum(idx - 1, 0)]
            frac = np.clip((np.asarray(t) - self.starts[idx]) / self.rise_time, 0.0, 1.0)
            frac = np.where(idx == 0, 1.0, frac)
            value = prev + (value - prev) * frac
        return float(value) if np.ndim(value) == 0 else value

    def breakpoints(self):
        pts = list(self.starts)
        if self.rise_time > 0:
            pts += [s + self.rise_time for s in self.starts[1:]]
        return sorted(set(pts))

    @property
    def max_abs_detuning(self) -> float:
        return float(np.max(np.abs(self.values)))


@dataclass(frozen=True)
class Trajectory:
    time: np.ndarray
    detuning: np.ndarray
    w: np.ndarray
    coh: np.ndarray
    phase: np.ndarray  # radians

    @property
    def phase_deg(self):
        return np.degrees(self.phase)

    def state(self, i) -> BlochState:
        return BlochState(float(self.w[i]), complex(self.coh[i]))


def simulate_switch(emitter: EmitterParams, rabi: float, schedule: DetuningSchedule, dt: float | None,
                    t_end: float, output_dt: float | None = None,
                    initial: BlochState | None = None) -> Trajectory:
    """Integrate the Bloch equations through a detuning schedule.

    Schedule breakpoints land exactly on step boundaries so the fourth-order
    accuracy survives instantaneous jumps.  The initial state defaults to the
    steady state of the first segment.  ``dt=None`` picks the step ceiling.
    """
    validate(emitter)
    if rabi <= 0:
        raise ZeroDrive("simulate_switch needs a nonzero drive to define a phase")
    if not t_end > 0:
        raise ScheduleInvalid("t_end must be > 0")
    ceiling = max_step(schedule.max_abs_detuning, rabi)
    if dt is None:
        dt = ceiling
    _check_step(dt, schedule.max_abs_detuning, rabi)
    if output_dt is None:
        output_dt = max(dt, t_end / 2000.0)
    n_out = int(math.floor(t_end / output_dt + 1e-9))
    out_t = np.arange(n_out + 1) * output_dt

    state = initial if initial is not None else steady_state(schedule(0.0), rabi)
    w = float(state.w)
    coh = complex(state.coh)

    knots = np.unique(np.concatenate([out_t, [b for b in schedule.breakpoints() if 0 < b < out_t[-1]]]))
    ws = np.empty(out_t.size)
    cs = np.empty(out_t.size, dtype=complex)
    ws[0], cs[0] = w, coh
    j = 1
    w_arr, c_arr = w, coh
    for a, b in zip(knots[:-1], knots[1:]):
        n = max(1, math.ceil((b - a) / dt - 1e-9))
        h = (b - a) / n
        mid = 0.5 * (a + b)
        if schedule.rise_time > 0:
            det = schedule
        else:
            value = schedule(mid)
            det = lambda _t, v=value: v  # noqa: E731
        for k in range(n):
            w_arr, c_arr = _rk4(w_arr, c_arr, a + k * h, h, det, rabi)
        if j < out_t.size and abs(b - out_t[j]) < 1e-9 * max(1.0, b):
            ws[j], cs[j] = w_arr, c_arr
            j += 1
    det_out = np.asarray([schedule(t) for t in out_t])
    phase = transient_transmission(BlochState(ws, cs), emitter, rabi).phase
    return Trajectory(out_t, det_out, ws, cs, phase)


def stark_to_detuning(voltage, coefficient_mhz_per_v: float, offset_mhz: float, gamma_mhz: float):
    """Affine Stark tuning: Delta / Gamma = (offset + coefficient * V) / Gamma."""
    if not np.isfinite(coefficient_mhz_per_v):
        raise OutOfRange("coefficient", "must be finite")
    out = (offset_mhz + coefficient_mhz_per_v * np.asarray(voltage, dtype=float)) / gamma_mhz
    return float(out) if np.ndim(out) == 0 else out


def first_entry_time(time, phase, t_edge: float, target: float, band: float) -> float:
    """Time after ``t_edge`` at which ``phase`` first comes within ``band`` of ``target``.

    Crossings between samples are located by linear interpolation.
    """
    mask = time >= t_edge
    t = time[mask]
    err = phase[mask] - target
    inside = np.abs(err) <= band
    if inside[0]:
        return 0.0
    for i in range(1, t.size):
        if inside[i] or np.sign(err[i]) != np.sign(err[i - 1]):
            # first point where |err| hits band, interpolated on the entering side
            e0, e1 = err[i - 1], err[i]
            edge = band if e0 > 0 else -band
            frac = (e0 - edge) / (e0 - e1)
            return float(t[i - 1] + frac * (t[i] - t[i - 1]) - t_edge)
    return math.inf
