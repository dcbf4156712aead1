"""Self-generated synthetic datasets for fits, demos, and tests.

Nothing here is checked in as opaque data: the drive-scan (carrier +
sideband) pair and the fluorescence scan are produced from fixed seeds by
the package's own models, so every fit target is reproducible from source.
"""

from __future__ import annotations

import math

import numpy as np
from scipy.special import j0, j1

from .bloch import SteadyStateModel
from .motion import lorentzian_mod_index

FIG4_TRUTH = {"m_max": 1.5, "delta_f": 750.0, "f_macro": 620.5e3, "a0": 1.0, "a1": 1.0}


def drive_scan_dataset(
    m_max: float = 1.5,
    delta_f: float = 750.0,
    f_macro: float = 620.5e3,
    a0: float = 1.0,
    a1: float = 1.0,
    span: float = 3000.0,
    n_points: int = 161,
    noise_fraction: float = 0.01,
    rng_seed: int = 0,
):
    """Synthetic carrier/sideband heights vs drive frequency.

    The true curves are |A_n J_n(m(f))|^2 with the Lorentzian m(f); Gaussian
    noise with sigma = noise_fraction * max(trace) is added per trace.
    Returns (f_drive, carrier, sideband) arrays.
    """
    f = np.linspace(f_macro - span, f_macro + span, n_points)
    m = lorentzian_mod_index(f, m_max, f_macro, delta_f)
    carrier = (a0 * j0(m)) ** 2
    sideband = (a1 * j1(m)) ** 2
    if noise_fraction > 0:
        rng = np.random.default_rng(rng_seed)
        carrier = carrier + noise_fraction * carrier.max() * rng.standard_normal(n_points)
        sideband = sideband + noise_fraction * sideband.max() * rng.standard_normal(n_points)
    return f, carrier, sideband


def save_drive_scan_csv(path, f, values, rbw_hz: float = 1.0, seed=None, label="drive scan"):
    """Write a drive-scan trace in the spectrum CSV format (power in dB).

    Noisy values can dip below zero at the wings; they are clamped to a tiny
    positive power (far below every feature) so the dB column stays finite.
    """
    floor = 1e-12 * max(float(np.max(values)), 1e-30)
    with open(path, "w") as fh:
        fh.write(f"# trapspec spectrum trace ({label})\n")
        fh.write(f"# rbw_hz = {rbw_hz!r}\n")
        fh.write(f"# noise_floor_db = {10 * math.log10(floor)!r}\n")
        fh.write(f"# seed = {seed!r}\n")
        fh.write("# window = rect\n")
        fh.write("# averages = 1\n")
        fh.write("freq_hz,power_db\n")
        for fi, vi in zip(f, values):
            fh.write(f"{fi:.10g},{10 * math.log10(max(vi, floor)):.10g}\n")


def excitation_scan_dataset(
    model: SteadyStateModel | None = None,
    span_hz: float = 30e6,
    n_points: int = 81,
    noise_fraction: float = 0.02,
    scale: float = 1.0,
    rng_seed: int = 0,
):
    """Fluorescence scan over the 650 nm detuning with relative noise.

    Returns (detunings_rad_s, fluorescence); noise sigma is noise_fraction
    times the scan maximum.
    """
    model = model or SteadyStateModel()
    grid = 2 * math.pi * np.linspace(-span_hz, span_hz, n_points)
    scan = model.excitation_spectrum("650", grid)
    y = scale * scan.p_population
    if noise_fraction > 0:
        rng = np.random.default_rng(rng_seed)
        y = y + noise_fraction * np.nanmax(y) * rng.standard_normal(n_points)
    return grid, y


def save_scan_csv(path, detunings_rad_s, fluorescence):
    with open(path, "w") as fh:
        fh.write("detuning_hz,p_population\n")
        for d, p in zip(detunings_rad_s, fluorescence):
            fh.write(f"{d / (2 * math.pi):.10g},{p:.12g}\n")


def load_scan_csv(path):
    det, flu = [], []
    with open(path) as fh:
        for line in fh:
            line = line.strip()
            if not line or line.startswith("#") or line.startswith("detuning_hz"):
                continue
            d, p = line.split(",")
            det.append(float(d))
            flu.append(float(p))
    return 2 * math.pi * np.asarray(det), np.asarray(flu)
