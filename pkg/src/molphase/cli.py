"""Command-line front end.

    molphase SUBCOMMAND [-c CONFIG] [-o OUTDIR]
    molphase echo CONFIG

Every subcommand writes plain CSV files plus a JSON sidecar carrying the
resolved configuration and seed.  Exit status: 0 success, 1 numerical
failure, 2 configuration error.
"""
from __future__ import annotations

import argparse
import csv
import json
import math
import sys
from pathlib import Path

import numpy as np

from . import __version__, bloch, config, floquet, heterodyne, imaging, selftest, steadystate
from .core import EmitterParams, MolphaseError
from .fitting import SpectrumParams, fit, fit_power_series, model_two_beam, synthesize_power_series, \
    synthesize_two_beam

SUBCOMMANDS = ("spectrum", "power", "switch", "beat", "image", "fit", "selftest")


def _emitter(cfg) -> EmitterParams:
    return EmitterParams(gamma=cfg["gamma_mhz"], omega0=cfg["omega0_mhz"], eta=cfg["eta"], psi=cfg["psi_rad"])


def _fmt(v) -> str:
    if isinstance(v, str):
        return v
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    return f"{float(v):.10g}"


def write_csv(path: Path, header, rows) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(header)
        for row in rows:
            writer.writerow([_fmt(v) for v in row])


def write_sidecar(path: Path, subcommand: str, cfg: dict, results: dict) -> None:
    doc = {
        "subcommand": subcommand,
        "version": __version__,
        "seed": cfg["seed"],
        "config": config.jsonable(cfg),
        "results": results,
    }
    with open(path, "w") as fh:
        json.dump(doc, fh, indent=2, sort_keys=True, default=_json_default)
        fh.write("\n")


def _json_default(o):
    if isinstance(o, np.ndarray):
        return o.tolist()
    if isinstance(o, (np.floating, np.integer, np.bool_)):
        return o.item()
    raise TypeError(type(o))


def cmd_spectrum(cfg, out: Path) -> dict:
    e = _emitter(cfg)
    nu = np.linspace(cfg["scan_min_mhz"], cfg["scan_max_mhz"], cfg["scan_points"])
    params = SpectrumParams(e.gamma, e.omega0, e.eta, e.psi, 0.0)
    ext, ph = model_two_beam(params, nu, cfg["aom_offset_mhz"], cfg["saturation"])
    write_csv(out / "spectrum.csv", ["detuning_mhz", "extinction_observed", "extinction_corrected", "phase_deg"],
              zip(nu - e.omega0, ext, 2.0 * ext, ph))
    (lo, d_lo), (hi, d_hi) = steadystate.weak_field_extrema(e.eta)
    return {"weak_field_extrema_deg": [math.degrees(lo), math.degrees(hi)],
            "weak_field_extrema_detuning_mhz": [d_lo * e.gamma, d_hi * e.gamma],
            "max_observed_extinction": float(np.max(ext))}


def cmd_power(cfg, out: Path) -> dict:
    powers = np.logspace(math.log10(cfg["power_min"]), math.log10(cfg["power_max"]), cfg["power_points"])
    split = cfg["aom_offset_mhz"] / cfg["gamma_mhz"] if cfg["power_model"] == "floquet" else None
    spectra = synthesize_power_series(cfg["eta"], cfg["reference_saturation"], powers, floquet_split=split)
    result = fit_power_series(spectra)
    s = cfg["reference_saturation"] * powers
    write_csv(out / "power.csv", ["relative_power", "saturation", "extinction", "max_phase_deg"],
              zip(powers, s, result.extinction, np.degrees(result.max_phase)))
    top = slice(-3, None)
    return {
        "fitted_eta": result.eta,
        "fitted_reference_saturation": result.reference_saturation,
        "eta_reference_correlation": result.correlation,
        "degenerate": result.degenerate,
        "extinction_slope": steadystate.loglog_slope(powers[top], result.extinction[top]),
        "phase_slope": steadystate.loglog_slope(powers[top], result.max_phase[top]),
    }


def cmd_switch(cfg, out: Path) -> dict:
    e = _emitter(cfg)
    rabi = float(math.sqrt(max(cfg["saturation"], 1e-12) / 2.0))
    sched = bloch.DetuningSchedule.from_bits(cfg["pulse_sequence"], cfg["detuning_on_gamma"], cfg["detuning_off_gamma"],
                                             cfg["bit_period_tau"], cfg["pulse_width_tau"], cfg["lead_tau"],
                                             cfg["rise_time_tau"])
    t_end = cfg["lead_tau"] + len(cfg["pulse_sequence"]) * cfg["bit_period_tau"]
    dt = cfg["dt_tau"] or None
    traj = bloch.simulate_switch(e, rabi, sched, dt, t_end, output_dt=cfg["output_dt_tau"])
    write_csv(out / "switch.csv", ["time_tau", "detuning_gamma", "phase_deg"],
              zip(traj.time, traj.detuning, traj.phase_deg))
    volts = np.linspace(cfg["voltage_min_v"], cfg["voltage_max_v"], cfg["voltage_points"])
    det = bloch.stark_to_detuning(volts, cfg["stark_mhz_per_v"], cfg["stark_offset_mhz"], cfg["gamma_mhz"])
    phase = steadystate.transmission(e, det, cfg["saturation"]).phase_deg
    write_csv(out / "stark_sweep.csv", ["voltage_v", "detuning_gamma", "phase_deg"], zip(volts, det, phase))
    return {"stark_phase_swing_deg": float(np.ptp(phase)),
            "phase_range_deg": [float(traj.phase_deg.min()), float(traj.phase_deg.max())]}


def _detection(cfg) -> heterodyne.DetectionConfig:
    return heterodyne.DetectionConfig(beat_frequency=cfg["aom_offset_mhz"], mean_count_rate=cfg["count_rate"],
                                      duration=cfg["duration_s"], bins=cfg["bins"], jitter_sigma=cfg["jitter_ps"],
                                      seed=cfg["seed"], dark_count_rate=cfg["dark_count_rate"])


def cmd_beat(cfg, out: Path) -> dict:
    e = _emitter(cfg)
    det = _detection(cfg)
    split = cfg["aom_offset_mhz"] / cfg["gamma_mhz"]
    d1 = cfg["beat_detuning_gamma"] - 0.5 * split
    t1 = complex(steadystate.transmission_t(e.eta, e.psi, d1, cfg["saturation"]))
    t2 = complex(steadystate.transmission_t(e.eta, e.psi, d1 + split, cfg["saturation"]))
    intensity = heterodyne.synthesize_intensity(t1, t2, det)
    hist = heterodyne.start_stop_histogram(heterodyne.sample_photons(intensity, det), det)
    hist.to_csv(out / "histogram.csv")
    res = heterodyne.fit_beat(hist, det)
    return {"injected_phase_deg": math.degrees(intensity.phase), "injected_visibility": intensity.visibility,
            "phase_deg": math.degrees(res.phase), "phase_err_deg": math.degrees(res.phase_err),
            "visibility": res.visibility, "visibility_err": res.visibility_err, "counts": res.counts,
            "jitter_attenuation": heterodyne.jitter_attenuation(det.beat_frequency, det.jitter_sigma)}


def cmd_image(cfg, out: Path) -> dict:
    e = _emitter(cfg)
    grid = imaging.ScanGrid.square(cfg["image_half_width_um"], cfg["pixel_um"])
    split = cfg["aom_offset_mhz"] / cfg["gamma_mhz"]
    im = imaging.render_images(e, (cfg["molecule_x_um"], cfg["molecule_y_um"]), grid, split, cfg["saturation"],
                               cfg["spot_fwhm_um"], cfg["psi_gradient_rad_per_um"])
    im.to_csv(out / "image.csv")
    phase, ext_d, ext_r = im.peak_contrast()
    return {"peak_beat_phase_deg": math.degrees(phase), "peak_extinction_detuned": ext_d,
            "peak_extinction_resonant": ext_r, "pixels": [int(grid.y.size), int(grid.x.size)]}


def _read_spectrum_csv(path):
    with open(path, newline="") as fh:
        rows = list(csv.DictReader(fh))
    try:
        nu = np.array([float(r["detuning_mhz"]) for r in rows])
        ext = np.array([float(r["extinction_observed"]) for r in rows])
        ph = np.array([float(r["phase_deg"]) for r in rows])
    except KeyError as exc:
        raise config.ParseError(f"data_csv lacks column {exc.args[0]!r}", key="data_csv") from None
    return nu, ext, ph


def cmd_fit(cfg, out: Path) -> dict:
    e = _emitter(cfg)
    if cfg["data_csv"]:
        nu, ext, ph = _read_spectrum_csv(cfg["data_csv"])
        truth = None
    else:
        nu = np.linspace(cfg["scan_min_mhz"], cfg["scan_max_mhz"], cfg["scan_points"])
        truth = SpectrumParams(e.gamma, e.omega0, e.eta, e.psi, 0.0)
        ext, ph = synthesize_two_beam(truth, nu, cfg["aom_offset_mhz"], cfg["saturation"], cfg["noise_extinction"],
                                      cfg["noise_phase_deg"], cfg["seed"])
    start = SpectrumParams(cfg["fit_init_gamma_mhz"], cfg["fit_init_omega0_mhz"], cfg["fit_init_eta"], 0.0, 0.0)
    res = fit(nu, ext, ph, start, cfg["aom_offset_mhz"], cfg["saturation"], cfg["noise_extinction"],
              cfg["noise_phase_deg"])
    res.config.update(config.jsonable(cfg))
    res.to_json(out / "fit_report.json")
    m_ext, m_ph = model_two_beam(res.params, nu, cfg["aom_offset_mhz"], cfg["saturation"])
    write_csv(out / "fit.csv", ["detuning_mhz", "extinction_observed", "phase_deg", "extinction_model", "phase_model_deg"],
              zip(nu, ext, ph, m_ext, m_ph))
    doc = res.to_dict()
    doc.pop("config")
    if truth is not None:
        doc["truth"] = {"gamma_mhz": truth.gamma_mhz, "omega0_mhz": truth.omega0_mhz, "eta": truth.eta,
                        "psi": truth.psi, "baseline": 0.0}
    return doc


def cmd_selftest(cfg, out: Path) -> dict:
    checks = selftest.run_all(cfg["seed"])
    write_csv(out / "selftest.csv", ["module", "check", "passed", "value", "limit"],
              ([c.module, c.name, int(c.passed), c.value, c.limit] for c in checks))
    for c in checks:
        print(f"{'PASS' if c.passed else 'FAIL'}  {c.module}.{c.name}  {c.value:.3e} (limit {c.limit:.1e})")
    return {"passed": all(c.passed for c in checks), "n_checks": len(checks),
            "failed": [f"{c.module}.{c.name}" for c in checks if not c.passed]}


COMMANDS = {
    "spectrum": cmd_spectrum,
    "power": cmd_power,
    "switch": cmd_switch,
    "beat": cmd_beat,
    "image": cmd_image,
    "fit": cmd_fit,
    "selftest": cmd_selftest,
}


def run(subcommand: str, config_path=None, output_dir=".") -> int:
    """Run one subcommand; returns the process exit status."""
    try:
        cfg = config.load(config_path) if config_path else config.parse_text("")
    except config.ParseError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    out = Path(output_dir)
    out.mkdir(parents=True, exist_ok=True)
    try:
        results = COMMANDS[subcommand](cfg, out)
    except config.ParseError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    except MolphaseError as exc:
        module = type(exc).__module__.rsplit(".", 1)[-1]
        print(f"numerical error in {module}: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 1
    write_sidecar(out / f"{subcommand}.json", subcommand, cfg, results)
    if subcommand == "selftest" and not results["passed"]:
        return 1
    return 0


def config_echo(config_path) -> str:
    return config.dump(config.load(config_path))


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(prog="molphase", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)
    for name in SUBCOMMANDS:
        p = sub.add_parser(name)
        p.add_argument("-c", "--config", help="key = value configuration file")
        p.add_argument("-o", "--output", default=".", help="directory for CSV/JSON artifacts")
    p = sub.add_parser("echo", help="print the fully resolved configuration")
    p.add_argument("config")
    args = parser.parse_args(argv)
    if args.command == "echo":
        try:
            sys.stdout.write(config_echo(args.config))
        except config.ParseError as exc:
            print(f"config error: {exc}", file=sys.stderr)
            return 2
        return 0
    return run(args.command, args.config, args.output)


if __name__ == "__main__":
    sys.exit(main())
