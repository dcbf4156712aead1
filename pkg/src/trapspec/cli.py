"""Command-line front end: reproducible spectra, scans, fits, and reports.

All I/O frequencies are plain Hz (detunings signed), intensities are
mW/cm^2, magnetic fields are Gauss, amplitudes are nm -- matching the way
the quantities are quoted in the lab. Angular frequencies and SI units are
internal. Every run writes a config echo (embedded in JSON outputs, or as
a .config.json sidecar next to CSV outputs) sufficient to reproduce it
bit-exactly; outputs carry no timestamps.

Exit codes: 0 success, 2 configuration error (message names the offending
key), 1 numerical failure.
"""

from __future__ import annotations

import argparse
import json
import math
import sys

import numpy as np

from . import __version__, datasets, fit, motion, spectrum
from .atom import LaserField, LevelScheme
from .bloch import ExperimentGeometry, SteadyStateModel
from .errors import ConfigurationError, DomainError, NumericalError, TrapSpecError
from .motion import detection_wave_vectors

MW_CM2 = 10.0  # W/m^2 per mW/cm^2
GAUSS = 1e-4  # T per Gauss
TWO_PI = 2 * math.pi

_DEFAULTS = {
    "spectrum": {
        "m_micro": 0.0,
        "macro_f_drive": None,
        "macro_m": None,
        "noise": True,
        "rbw": 1.0,
        "f_mix": 32.45e6,
        "photon_rate": 2.5e4,
        "quantum_efficiency": 0.8,
        "mode_matching": 1.0,
        "averages": 1,
        "sample_rate": 65.536e6,
        "target_rate": 163840.0,
        "mode": "auto",
        "window": "rect",
        "span": None,
        "amplitude": 1.0,
        "backend": None,
        "seed": 0,
        "out": "spectrum.csv",
    },
    "scan": {
        "axis": "650",
        "start": -30e6,
        "stop": 30e6,
        "points": 121,
        "delta_493": -19e6,
        "delta_650": 5e6,
        "i_493": 189.0,
        "i_650": 107.0,
        "b_field": 2.8,
        "gamma_sp": 15.1e6,
        "gamma_pd": 5.3e6,
        "format": "csv",
        "seed": 0,
        "out": "scan.csv",
    },
    "cooling-rate": {
        "delta_493": -19e6,
        "delta_650": 5e6,
        "i_493": 189.0,
        "i_650": 107.0,
        "b_field": 2.8,
        "gamma_sp": 15.1e6,
        "gamma_pd": 5.3e6,
        "step": 100e3,
        "seed": 0,
        "out": "cooling.json",
    },
    "fit-sidebands": {
        "carrier": None,
        "sideband": None,
        "separate": False,
        "db": False,
        "seed": 0,
        "out": "sidebands_fit.json",
    },
    "fit-scan": {
        "data": None,
        "free": "delta_493,i_493,i_650,b_field,scale",
        "delta_493": -19e6,
        "delta_650": 5e6,
        "i_493": 189.0,
        "i_650": 107.0,
        "b_field": 2.8,
        "sigma": None,
        "seed": 0,
        "out": "scan_fit.json",
    },
    "micromotion": {
        "amplitude_nm": None,
        "mod_index": None,
        "order_max": 3,
        "snr_db": 40.0,
        "seed": 0,
        "out": "micromotion.json",
    },
    "make-dataset": {
        "kind": "fig4",
        "noise": None,
        "seed": 0,
        "out": "dataset",
    },
}


def _add_common(sp):
    sp.add_argument("--config", help="JSON file with defaults (flags override)")
    sp.add_argument("--seed", type=int, default=None, help="RNG seed")
    sp.add_argument("--out", default=None, help="output path")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="trapspec",
        description="Heterodyne fluorescence spectra and cooling-rate analysis "
        "for a single trapped Ba+ ion.",
    )
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="command", required=True)

    sp = sub.add_parser("spectrum", help="synthesize and analyze a heterodyne trace")
    sp.add_argument("--m-micro", type=float, default=None, help="micromotion modulation index")
    sp.add_argument("--macro-f-drive", type=float, default=None, help="macromotion drive, Hz")
    sp.add_argument("--macro-m", type=float, default=None, help="macromotion modulation index")
    sp.add_argument("--noise", action=argparse.BooleanOptionalAction, default=None,
                    help="include shot noise (default on)")
    sp.add_argument("--rbw", type=float, default=None, help="resolution bandwidth, Hz")
    sp.add_argument("--f-mix", type=float, default=None, help="mixer frequency, Hz")
    sp.add_argument("--photon-rate", type=float, default=None, help="detected photons/s")
    sp.add_argument("--quantum-efficiency", type=float, default=None)
    sp.add_argument("--mode-matching", type=float, default=None)
    sp.add_argument("--averages", type=int, default=None, help="RMS trace averages")
    sp.add_argument("--sample-rate", type=float, default=None, help="full-rate fs, Hz")
    sp.add_argument("--target-rate", type=float, default=None, help="decimated rate, Hz")
    sp.add_argument("--mode", choices=["auto", "full", "baseband"], default=None)
    sp.add_argument("--window", default=None, help="rect, hann, ...")
    sp.add_argument("--span", default=None, help="displayed span 'lo,hi' in offset Hz")
    sp.add_argument("--amplitude", type=float, default=None)
    sp.add_argument("--backend", choices=["cython", "numpy"], default=None)
    _add_common(sp)

    sp = sub.add_parser("scan", help="excitation spectrum P_P vs detuning")
    sp.add_argument("--axis", choices=["493", "650"], default=None)
    sp.add_argument("--start", type=float, default=None, help="first detuning, Hz")
    sp.add_argument("--stop", type=float, default=None, help="last detuning, Hz")
    sp.add_argument("--points", type=int, default=None)
    for flag in ("--delta-493", "--delta-650"):
        sp.add_argument(flag, type=float, default=None, help="laser detuning, Hz")
    sp.add_argument("--i-493", type=float, default=None, help="intensity, mW/cm^2")
    sp.add_argument("--i-650", type=float, default=None, help="intensity, mW/cm^2")
    sp.add_argument("--b-field", type=float, default=None, help="magnetic field, Gauss")
    sp.add_argument("--gamma-sp", type=float, default=None, help="P->S rate, Hz")
    sp.add_argument("--gamma-pd", type=float, default=None, help="P->D rate, Hz")
    sp.add_argument("--format", choices=["csv", "json"], default=None)
    _add_common(sp)

    sp = sub.add_parser("cooling-rate", help="cooling coefficient alpha from the Bloch model")
    sp.add_argument("--defaults", action="store_true",
                    help="use the published operating point (same as giving no flags)")
    for flag in ("--delta-493", "--delta-650"):
        sp.add_argument(flag, type=float, default=None, help="laser detuning, Hz")
    sp.add_argument("--i-493", type=float, default=None, help="intensity, mW/cm^2")
    sp.add_argument("--i-650", type=float, default=None, help="intensity, mW/cm^2")
    sp.add_argument("--b-field", type=float, default=None, help="magnetic field, Gauss")
    sp.add_argument("--gamma-sp", type=float, default=None, help="P->S rate, Hz")
    sp.add_argument("--gamma-pd", type=float, default=None, help="P->D rate, Hz")
    sp.add_argument("--step", type=float, default=None, help="finite-difference step, Hz")
    _add_common(sp)

    sp = sub.add_parser("fit-sidebands", help="joint carrier/sideband drive-scan fit")
    sp.add_argument("--carrier", default=None, help="carrier trace CSV")
    sp.add_argument("--sideband", default=None, help="sideband trace CSV")
    sp.add_argument("--separate", action="store_true", default=None,
                    help="fit the traces separately instead of jointly")
    sp.add_argument("--db", action="store_true", default=None, help="fit in dB units")
    _add_common(sp)

    sp = sub.add_parser("fit-scan", help="fit the Bloch model to a fluorescence scan")
    sp.add_argument("--data", default=None, help="scan CSV (detuning_hz,p_population)")
    sp.add_argument("--free", default=None, help="comma list of free parameters")
    for flag in ("--delta-493", "--delta-650"):
        sp.add_argument(flag, type=float, default=None, help="initial guess, Hz")
    sp.add_argument("--i-493", type=float, default=None, help="initial guess, mW/cm^2")
    sp.add_argument("--i-650", type=float, default=None, help="initial guess, mW/cm^2")
    sp.add_argument("--b-field", type=float, default=None, help="initial guess, Gauss")
    sp.add_argument("--sigma", type=float, default=None, help="noise sigma of the scan values")
    _add_common(sp)

    sp = sub.add_parser("micromotion", help="modulation index, sidebands, sensitivity")
    sp.add_argument("--amplitude-nm", type=float, default=None,
                    help="micromotion amplitude along k_d - k_l, nm")
    sp.add_argument("--mod-index", type=float, default=None, help="modulation index m")
    sp.add_argument("--order-max", type=int, default=None)
    sp.add_argument("--snr-db", type=float, default=None, help="SNR for the sensitivity estimate")
    _add_common(sp)

    sp = sub.add_parser("make-dataset", help="generate the bundled synthetic datasets")
    sp.add_argument("--kind", choices=["fig4", "scan"], default=None)
    sp.add_argument("--noise", type=float, default=None, help="noise fraction")
    _add_common(sp)

    return parser


def _resolve(args, command: str) -> dict:
    defaults = _DEFAULTS[command]
    config = {}
    if getattr(args, "config", None):
        with open(args.config) as fh:
            config = json.load(fh)
        if not isinstance(config, dict):
            raise ConfigurationError("config file must contain a JSON object")
        unknown = sorted(set(config) - set(defaults))
        if unknown:
            raise ConfigurationError(f"unknown config key {unknown[0]!r}")
    effective = {}
    for key, default in defaults.items():
        cli_val = getattr(args, key, None)
        effective[key] = cli_val if cli_val is not None else config.get(key, default)
    return effective


def _write_json(path, payload: dict):
    with open(path, "w") as fh:
        json.dump(payload, fh, indent=2, sort_keys=True)
        fh.write("\n")


def _echo(command: str, params: dict) -> dict:
    return {"command": command, "parameters": params, "version": __version__}


def _model_from(params: dict, scheme: LevelScheme | None = None) -> SteadyStateModel:
    scheme = scheme or LevelScheme(
        gamma_sp=TWO_PI * params.get("gamma_sp", 15.1e6),
        gamma_pd=TWO_PI * params.get("gamma_pd", 5.3e6),
    )
    geom = ExperimentGeometry()
    laser_g = LaserField(
        scheme.wavelength_sp,
        TWO_PI * params["delta_493"],
        MW_CM2 * params["i_493"],
        geom.laser_polarization,
        geom.laser_k,
    )
    laser_r = LaserField(
        scheme.wavelength_pd,
        TWO_PI * params["delta_650"],
        MW_CM2 * params["i_650"],
        geom.laser_polarization,
        geom.laser_k,
    )
    return SteadyStateModel(
        laser_g, laser_r, b_field=GAUSS * params["b_field"], scheme=scheme, geometry=geom
    )


def _cmd_spectrum(params: dict) -> int:
    config = spectrum.HeterodyneConfig(
        f_mix=params["f_mix"],
        resolution_bandwidth=params["rbw"],
        photon_rate=params["photon_rate"],
        quantum_efficiency=params["quantum_efficiency"],
        mode_matching=params["mode_matching"],
    )
    macro = None
    if params["macro_f_drive"] is not None or params["macro_m"] is not None:
        if params["macro_f_drive"] is None or params["macro_m"] is None:
            raise ConfigurationError(
                "macro_f_drive and macro_m must be given together"
            )
        macro = (params["macro_f_drive"], params["macro_m"])
    span = params["span"]
    if isinstance(span, str):
        try:
            lo, hi = (float(v) for v in span.split(","))
        except ValueError as exc:
            raise ConfigurationError(f"span must be 'lo,hi': {exc}") from None
        span = (lo, hi)
    # Center a grid-locked tone exactly on a bin when the offsets are integral.
    offset = config.f_beat - config.f_mix
    align = 1
    if abs(offset - round(offset)) < 1e-6 and abs(params["target_rate"] - round(params["target_rate"])) < 1e-6:
        g = math.gcd(int(round(params["target_rate"])), abs(int(round(offset))))
        if g > 0:
            align = int(round(params["target_rate"])) // g
    trace = spectrum.heterodyne_trace(
        config,
        m_micro=params["m_micro"],
        macro=macro,
        averages=params["averages"],
        sample_rate=params["sample_rate"],
        rng_seed=params["seed"],
        mode=params["mode"],
        window=params["window"],
        span=span,
        target_rate=params["target_rate"],
        amplitude=params["amplitude"],
        noise=params["noise"],
        bin_align=align if align <= 1 << 22 else 1,
        backend=params["backend"],
    )
    trace.save_csv(params["out"])
    _write_json(params["out"] + ".config.json", _echo("spectrum", params))
    return 0


def _cmd_scan(params: dict) -> int:
    model = _model_from(params)
    grid = TWO_PI * np.linspace(params["start"], params["stop"], params["points"])
    scan = model.excitation_spectrum(params["axis"], grid)
    if params["format"] == "json":
        payload = scan.to_json_dict()
        payload["config"] = _echo("scan", params)
        _write_json(params["out"], payload)
    else:
        scan.save_csv(params["out"])
        _write_json(params["out"] + ".config.json", _echo("scan", params))
    if scan.failures:
        raise NumericalError(
            f"{len(scan.failures)} scan points failed; first: {scan.failures[0][1]}"
        )
    return 0


def _cmd_cooling_rate(params: dict) -> int:
    model = _model_from(params)
    result = motion.cooling_coefficient(model, step=TWO_PI * params["step"])
    payload = result.to_json_dict()
    payload["config"] = _echo("cooling-rate", params)
    _write_json(params["out"], payload)
    return 0


def _cmd_fit_sidebands(params: dict) -> int:
    if not params["carrier"] or not params["sideband"]:
        raise ConfigurationError("carrier and sideband trace paths are required")
    carrier = spectrum.SpectrumTrace.load_csv(params["carrier"])
    sideband = spectrum.SpectrumTrace.load_csv(params["sideband"])
    result = fit.fit_sideband_pair(
        carrier, sideband, joint=not params["separate"], fit_db=bool(params["db"])
    )
    if isinstance(result, dict):
        payload = {label: r.to_json_dict() for label, r in result.items()}
    else:
        payload = result.to_json_dict()
    payload["config"] = _echo("fit-sidebands", params)
    _write_json(params["out"], payload)
    return 0


def _cmd_fit_scan(params: dict) -> int:
    if not params["data"]:
        raise ConfigurationError("data path is required")
    detunings, values = datasets.load_scan_csv(params["data"])
    model = _model_from(params)
    free = [name.strip() for name in params["free"].split(",") if name.strip()]
    result = fit.fit_bloch_scan(
        detunings, values, model, free=free, sigma=params["sigma"]
    )
    payload = result.to_json_dict()
    # Report in I/O units as well (Hz, mW/cm^2, Gauss).
    readable = {}
    for name, value in result.parameters.items():
        if name.startswith("delta"):
            readable[name + "_hz"] = value / TWO_PI
        elif name.startswith("i_"):
            readable[name + "_mw_cm2"] = value / MW_CM2
        elif name == "b_field":
            readable[name + "_gauss"] = value / GAUSS
        else:
            readable[name] = value
    payload["parameters_io_units"] = readable
    payload["config"] = _echo("fit-scan", params)
    _write_json(params["out"], payload)
    return 0


def _cmd_micromotion(params: dict) -> int:
    geom = ExperimentGeometry()
    k_l, k_d = detection_wave_vectors(geom)
    diff = float(np.linalg.norm(k_d - k_l))
    if params["mod_index"] is not None and params["amplitude_nm"] is not None:
        raise ConfigurationError("give either mod_index or amplitude_nm, not both")
    if params["mod_index"] is not None:
        m = params["mod_index"]
        amplitude = m / diff
    else:
        amplitude = 1e-9 * (params["amplitude_nm"] if params["amplitude_nm"] is not None else 26.0)
        m = amplitude * diff
    lines = spectrum.compose_lines(abs(m), params["order_max"])
    carrier = lines.power_at(32.5e6)
    first = lines.power_at(32.5e6 + spectrum.F_PAUL_DEFAULT)
    snr_db = params["snr_db"]
    m_min = 2.0 * 10 ** (-snr_db / 20)
    payload = {
        "mod_index": m,
        "amplitude_nm": amplitude * 1e9,
        "k_difference_per_m": diff,
        "first_sideband_to_carrier_db": (
            10 * math.log10(first / carrier) if carrier > 0 and first > 0 else None
        ),
        "lines": lines.to_json_dict()["lines"],
        "min_detectable": {
            "snr_db": snr_db,
            "mod_index": m_min,
            "amplitude_nm": m_min / diff * 1e9,
        },
        "config": _echo("micromotion", params),
    }
    _write_json(params["out"], payload)
    return 0


def _cmd_make_dataset(params: dict) -> int:
    seed = params["seed"]
    prefix = params["out"]
    if params["kind"] == "fig4":
        noise = 0.01 if params["noise"] is None else params["noise"]
        f, carrier, sideband = datasets.drive_scan_dataset(
            noise_fraction=noise, rng_seed=seed
        )
        datasets.save_drive_scan_csv(f"{prefix}-carrier.csv", f, carrier, seed=seed, label="carrier")
        datasets.save_drive_scan_csv(f"{prefix}-sideband.csv", f, sideband, seed=seed, label="sideband")
        _write_json(
            f"{prefix}-truth.json",
            {"truth": datasets.FIG4_TRUTH, "noise_fraction": noise,
             "config": _echo("make-dataset", params)},
        )
    else:
        noise = 0.02 if params["noise"] is None else params["noise"]
        detunings, values = datasets.excitation_scan_dataset(
            noise_fraction=noise, rng_seed=seed
        )
        datasets.save_scan_csv(f"{prefix}-scan.csv", detunings, values)
        _write_json(
            f"{prefix}-scan.config.json",
            {"noise_fraction": noise, "config": _echo("make-dataset", params)},
        )
    return 0


_HANDLERS = {
    "spectrum": _cmd_spectrum,
    "scan": _cmd_scan,
    "cooling-rate": _cmd_cooling_rate,
    "fit-sidebands": _cmd_fit_sidebands,
    "fit-scan": _cmd_fit_scan,
    "micromotion": _cmd_micromotion,
    "make-dataset": _cmd_make_dataset,
}


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:  # argparse handles usage/unknown commands
        return int(exc.code) if exc.code else 0
    try:
        params = _resolve(args, args.command)
        return _HANDLERS[args.command](params)
    except (ConfigurationError, DomainError) as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    except NumericalError as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return 1
    except TrapSpecError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except OSError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
