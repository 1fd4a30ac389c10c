"""Shared value types, unit conventions and validation.

Internally everything is expressed in linewidth-normalized units: detunings
and Rabi frequencies are divided by the linewidth ``gamma`` and times are
measured in excited-state lifetimes ``tau``.  With ``gamma`` taken as an
angular rate this makes ``gamma * tau == 1``.  Physical units (MHz, ns, V,
degrees) only appear at the I/O boundary.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np


class MolphaseError(Exception):
    """Base class for all library errors."""


class OutOfRange(MolphaseError, ValueError):
    def __init__(self, field_name: str, message: str = ""):
        self.field = field_name
        super().__init__(f"{field_name}: {message}" if message else field_name)


class EmptyGrid(MolphaseError, ValueError):
    pass


# Linewidth <-> lifetime.  A FWHM given in linear frequency (Hz) belongs to an
# excited state with lifetime tau = 1 / (2 pi gamma).
def lifetime_from_linewidth(gamma_hz: float) -> float:
    if not gamma_hz > 0:
        raise OutOfRange("gamma", "must be > 0")
    return 1.0 / (2.0 * math.pi * gamma_hz)


def linewidth_from_lifetime(tau_s: float) -> float:
    if not tau_s > 0:
        raise OutOfRange("tau", "must be > 0")
    return 1.0 / (2.0 * math.pi * tau_s)


def lifetime_ns_from_linewidth_mhz(gamma_mhz: float) -> float:
    return lifetime_from_linewidth(gamma_mhz * 1e6) * 1e9


@dataclass(frozen=True)
class EmitterParams:
    """Two-level emitter as seen by a focused beam.

    Attributes
    ----------
    gamma : float
        Linewidth (FWHM), MHz at the I/O boundary.
    omega0 : float
        Resonance frequency relative to an arbitrary reference, MHz.
    eta : float
        Coupling efficiency in [0, 1].
    psi : float
        Residual geometric phase in radians, (-pi, pi].
    tau : float
        Excited-state lifetime.  Defaults to the value implied by ``gamma``
        through :func:`lifetime_ns_from_linewidth_mhz` (ns).
    """

    gamma: float = 21.0
    omega0: float = 0.0
    eta: float = 0.1
    psi: float = 0.0
    tau: float | None = None

    def __post_init__(self):
        if self.tau is None and self.gamma > 0:
            object.__setattr__(self, "tau", lifetime_ns_from_linewidth_mhz(self.gamma))

    def replace(self, **changes) -> "EmitterParams":
        values = dict(gamma=self.gamma, omega0=self.omega0, eta=self.eta, psi=self.psi, tau=self.tau)
        if "gamma" in changes and "tau" not in changes:
            values["tau"] = None
        values.update(changes)
        return EmitterParams(**values)


def validate(emitter: EmitterParams) -> EmitterParams:
    """Return ``emitter`` unchanged, or raise :class:`OutOfRange`."""
    if not (np.isfinite(emitter.gamma) and emitter.gamma > 0):
        raise OutOfRange("gamma", "linewidth must be > 0")
    if not np.isfinite(emitter.omega0):
        raise OutOfRange("omega0", "must be finite")
    if not (0.0 <= emitter.eta <= 1.0):
        raise OutOfRange("eta", "coupling efficiency must lie in [0, 1]")
    if not (-math.pi < emitter.psi <= math.pi):
        raise OutOfRange("psi", "geometric phase must lie in (-pi, pi]")
    if emitter.tau is None or not (np.isfinite(emitter.tau) and emitter.tau > 0):
        raise OutOfRange("tau", "lifetime must be > 0")
    return emitter


def rabi_from_saturation(saturation):
    """Rabi frequency in linewidth units for S = 2 Omega^2 / Gamma^2."""
    return np.sqrt(np.asarray(saturation, dtype=float) / 2.0)


def saturation_from_rabi(rabi):
    return 2.0 * np.asarray(rabi, dtype=float) ** 2


@dataclass(frozen=True)
class DriveField:
    """One beam: detuning from resonance and drive strength.

    ``detuning`` and ``rabi`` share the linewidth units of the emitter they
    are applied to.  Construct with :meth:`from_saturation` or
    :meth:`from_rabi` so the two strength descriptions stay consistent.
    """

    detuning: float
    saturation: float
    rabi: float = field(init=False)

    def __post_init__(self):
        if not (np.isfinite(self.saturation) and self.saturation >= 0):
            raise OutOfRange("saturation", "must be >= 0")
        object.__setattr__(self, "rabi", float(rabi_from_saturation(self.saturation)))

    @classmethod
    def from_saturation(cls, detuning: float, saturation: float) -> "DriveField":
        return cls(detuning=detuning, saturation=saturation)

    @classmethod
    def from_rabi(cls, detuning: float, rabi: float) -> "DriveField":
        if not rabi >= 0:
            raise OutOfRange("rabi", "must be >= 0")
        return cls(detuning=detuning, saturation=float(saturation_from_rabi(rabi)))


def drive_from_power(relative_power: float, reference_saturation: float, detuning: float = 0.0) -> DriveField:
    """Map a relative incident power onto a saturation parameter (linear)."""
    if not relative_power >= 0:
        raise OutOfRange("relative_power", "must be >= 0")
    if not reference_saturation > 0:
        raise OutOfRange("reference_saturation", "must be > 0")
    return DriveField(detuning=detuning, saturation=relative_power * reference_saturation)


@dataclass(frozen=True)
class ComplexTransmission:
    """Complex field transmission with its derived observables.

    ``t`` may be a scalar or an array; ``phase`` (radians) and
    ``extinction`` are computed from it and never set independently.
    """

    t: complex | np.ndarray
    phase: float | np.ndarray = field(init=False)
    extinction: float | np.ndarray = field(init=False)

    def __post_init__(self):
        t = self.t
        object.__setattr__(self, "phase", np.angle(t))
        object.__setattr__(self, "extinction", 1.0 - np.abs(t) ** 2)

    @property
    def phase_deg(self):
        return np.degrees(self.phase)


def wrap_phase(phi):
    """Principal value in (-pi, pi]."""
    wrapped = -np.remainder(-np.asarray(phi, dtype=float) + math.pi, 2 * math.pi) + math.pi
    return wrapped if np.ndim(wrapped) else float(wrapped)
