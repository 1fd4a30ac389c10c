"""Flat ``key = value`` configuration files.

One assignment per line, ``#`` starts a comment.  Every key has a type and a
default; unknown or repeated keys are errors reported with their line number.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

from .core import MolphaseError


class ParseError(MolphaseError, ValueError):
    def __init__(self, message: str, line: int | None = None, key: str | None = None):
        self.line = line
        self.key = key
        where = f"line {line}: " if line is not None else ""
        super().__init__(where + message)


def _bits(text: str):
    items = [s.strip() for s in text.replace(" ", ",").split(",") if s.strip()]
    out = []
    for s in items:
        if s not in ("0", "1"):
            raise ValueError(f"pulse bit {s!r} is not 0 or 1")
        out.append(int(s))
    return tuple(out)


def _format_bits(bits) -> str:
    return ",".join(str(b) for b in bits)


@dataclass(frozen=True)
class Key:
    default: object
    kind: type | str
    doc: str


SCHEMA: dict[str, Key] = {
    # emitter
    "gamma_mhz": Key(21.0, float, "linewidth FWHM"),
    "omega0_mhz": Key(0.0, float, "resonance frequency offset"),
    "eta": Key(0.1, float, "coupling efficiency"),
    "psi_rad": Key(0.0, float, "residual geometric phase"),
    "saturation": Key(1e-4, float, "saturation parameter per beam"),
    "aom_offset_mhz": Key(114.3, float, "frequency split between the two beams"),
    "seed": Key(0, int, "64-bit master seed"),
    # spectrum scan
    "scan_min_mhz": Key(-250.0, float, "first beam-1 detuning"),
    "scan_max_mhz": Key(150.0, float, "last beam-1 detuning"),
    "scan_points": Key(401, int, "points in the scan"),
    # power series
    "power_min": Key(1.0, float, "lowest relative power"),
    "power_max": Key(1e4, float, "highest relative power"),
    "power_points": Key(9, int, "number of powers (log spaced)"),
    "reference_saturation": Key(0.1, float, "saturation at relative power 1"),
    "power_model": Key("closed", str, "closed or floquet"),
    # stark switch
    "pulse_sequence": Key((1, 1, 0, 1), "bits", "logic pulse bits"),
    "detuning_off_gamma": Key(1.0, float, "detuning with the pulse off"),
    "detuning_on_gamma": Key(-300.0, float, "detuning with the pulse on"),
    "bit_period_tau": Key(2.0, float, "bit slot length"),
    "pulse_width_tau": Key(1.0, float, "on time within a 1 slot"),
    "lead_tau": Key(1.0, float, "time before the first slot"),
    "rise_time_tau": Key(0.0, float, "linear edge duration"),
    "dt_tau": Key(0.0, float, "integration step (0 = automatic ceiling)"),
    "output_dt_tau": Key(0.001, float, "trajectory sampling interval"),
    "stark_mhz_per_v": Key(-21.0 * 0.4743416490252569, float, "linear Stark coefficient"),
    "stark_offset_mhz": Key(21.0 * 0.4743416490252569, float, "detuning at zero volts"),
    "voltage_min_v": Key(0.0, float, "Stark sweep start"),
    "voltage_max_v": Key(2.0, float, "Stark sweep end"),
    "voltage_points": Key(81, int, "Stark sweep points"),
    # heterodyne
    "count_rate": Key(1e6, float, "mean detected count rate (1/s)"),
    "duration_s": Key(1.0, float, "integration time"),
    "bins": Key(64, int, "histogram bins per beat period"),
    "jitter_ps": Key(300.0, float, "Gaussian detector jitter"),
    "dark_count_rate": Key(0.0, float, "flat background count rate (1/s)"),
    "beat_detuning_gamma": Key(-0.4743416490252569, float, "emitter detuning from the beam midpoint"),
    # imaging
    "spot_fwhm_um": Key(0.5, float, "focal spot FWHM"),
    "pixel_um": Key(0.05, float, "scan pitch"),
    "image_half_width_um": Key(1.0, float, "half width of the square scan"),
    "molecule_x_um": Key(0.0, float, "emitter x"),
    "molecule_y_um": Key(0.0, float, "emitter y"),
    "psi_gradient_rad_per_um": Key(0.0, float, "radial geometric-phase slope"),
    # fitting
    "data_csv": Key("", str, "measured spectrum (empty = synthesize)"),
    "noise_extinction": Key(0.005, float, "extinction noise sigma"),
    "noise_phase_deg": Key(0.2, float, "phase noise sigma"),
    "fit_init_gamma_mhz": Key(30.0, float, "starting linewidth"),
    "fit_init_omega0_mhz": Key(5.0, float, "starting resonance"),
    "fit_init_eta": Key(0.15, float, "starting coupling"),
}


def _coerce(key: str, raw: str, line: int | None):
    entry = SCHEMA[key]
    try:
        if entry.kind == "bits":
            return _bits(raw)
        if entry.kind is int:
            value = int(raw, 0)
            return value
        if entry.kind is float:
            value = float(raw)
            if not math.isfinite(value):
                raise ValueError("not finite")
            return value
        if len(raw) >= 2 and raw[0] == raw[-1] and raw[0] in "\"'":
            raw = raw[1:-1]
        return raw
    except ValueError as exc:
        raise ParseError(f"bad value for {key!r}: {raw!r} ({exc})", line, key) from None


def parse_text(text: str) -> dict:
    """Parse config text into a fully resolved dict (defaults applied)."""
    found: dict[str, object] = {}
    for lineno, raw_line in enumerate(text.splitlines(), start=1):
        line = raw_line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ParseError(f"expected 'key = value', got {raw_line.strip()!r}", lineno)
        key, value = (s.strip() for s in line.split("=", 1))
        if key not in SCHEMA:
            raise ParseError(f"unknown key {key!r}", lineno, key)
        if key in found:
            raise ParseError(f"duplicate key {key!r}", lineno, key)
        found[key] = _coerce(key, value, lineno)
    resolved = {k: entry.default for k, entry in SCHEMA.items()}
    resolved.update(found)
    check(resolved)
    return resolved


def load(path) -> dict:
    try:
        with open(path) as fh:
            text = fh.read()
    except OSError as exc:
        raise ParseError(f"cannot read {path}: {exc.strerror}") from None
    return parse_text(text)


def check(cfg: dict) -> None:
    """Field-level validation; emitter invariants are delegated to ``core``."""
    from .core import EmitterParams, OutOfRange, validate

    try:
        validate(EmitterParams(gamma=cfg["gamma_mhz"], omega0=cfg["omega0_mhz"], eta=cfg["eta"], psi=cfg["psi_rad"]))
    except OutOfRange as exc:
        raise ParseError(f"invalid emitter: {exc}", key=exc.field) from None
    positive = ("aom_offset_mhz", "scan_points", "power_min", "power_max", "power_points", "reference_saturation",
                "bit_period_tau", "pulse_width_tau", "output_dt_tau", "duration_s", "bins", "spot_fwhm_um",
                "pixel_um", "image_half_width_um", "noise_extinction", "noise_phase_deg", "fit_init_gamma_mhz",
                "voltage_points")
    for key in positive:
        if not cfg[key] > 0:
            raise ParseError(f"{key} must be > 0", key=key)
    nonneg = ("saturation", "lead_tau", "rise_time_tau", "dt_tau", "count_rate", "jitter_ps", "dark_count_rate")
    for key in nonneg:
        if cfg[key] < 0:
            raise ParseError(f"{key} must be >= 0", key=key)
    if cfg["scan_max_mhz"] <= cfg["scan_min_mhz"]:
        raise ParseError("scan_max_mhz must exceed scan_min_mhz", key="scan_max_mhz")
    if cfg["power_max"] < cfg["power_min"]:
        raise ParseError("power_max must be >= power_min", key="power_max")
    if cfg["power_model"] not in ("closed", "floquet"):
        raise ParseError("power_model must be 'closed' or 'floquet'", key="power_model")
    if not 0 <= cfg["seed"] < 2**64:
        raise ParseError("seed must be a 64-bit unsigned integer", key="seed")
    if cfg["bins"] < 8:
        raise ParseError("bins must be >= 8", key="bins")
    if not 0 < cfg["fit_init_eta"] <= 1:
        raise ParseError("fit_init_eta must lie in (0, 1]", key="fit_init_eta")
    if cfg["pulse_width_tau"] >= cfg["bit_period_tau"]:
        raise ParseError("pulse_width_tau must be shorter than bit_period_tau", key="pulse_width_tau")


def format_value(value) -> str:
    if isinstance(value, tuple):
        return _format_bits(value)
    if isinstance(value, float):
        return repr(value)
    return str(value)


def dump(cfg: dict) -> str:
    """Canonical text: every key, sorted, defaults included."""
    return "".join(f"{k} = {format_value(cfg[k])}\n" for k in sorted(cfg))


def jsonable(cfg: dict) -> dict:
    return {k: (list(v) if isinstance(v, tuple) else v) for k, v in sorted(cfg.items())}
