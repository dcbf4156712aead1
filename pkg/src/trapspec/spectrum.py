"""Heterodyne signal synthesis and the mixer + FFT spectrum analyzer.

The photodiode difference signal is modeled as a phase-modulated carrier at
the AOM beat frequency plus white shot noise scaled to the detected photon
rate. The analyzer chain emulates the experiment: quadrature digital
down-conversion at f_mix, anti-alias low-pass filtering and decimation, then
windowed, RMS-averaged periodograms with a calibrated resolution bandwidth.

Two synthesis routes exist. ``mode='full'`` streams the real full-rate
signal through the complete chain (hot kernels, compiled or NumPy backend).
``mode='baseband'`` synthesizes the analytically equivalent complex baseband
(in-band spectral lines plus band-limited noise) at the decimated rate; it
is exact for this signal class and makes sub-Hz resolution bandwidths cheap.
Power is tone-calibrated: a bin-centered tone reads its total power and a
noise bin reads (PSD x RBW), the way a spectrum analyzer displays them.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.signal import firwin, get_window, kaiserord
from scipy.special import jv

from ._kernels import get_backend
from .bloch import ExperimentGeometry
from .errors import ConfigurationError, DomainError, ResolutionError
from .motion import detection_wave_vectors

F_AOM1_DEFAULT = 112.5e6  # Hz
F_AOM2_DEFAULT = 80.0e6  # Hz
F_MIX_CARRIER = 32.45e6  # Hz, puts the elastic peak at 50 kHz
F_PAUL_DEFAULT = 18.53e6  # Hz
LOWPASS_CUTOFF_MAX = 100e3  # Hz, analyzer chain bandwidth
MAX_SAMPLES_IN_MEMORY = 2**27  # synthesize_timeseries cap; stream beyond this
_CHUNK_TARGET = 2**20


@dataclass(frozen=True)
class HeterodyneConfig:
    """Detection chain parameters: AOM shifts, mixer, bandwidth, photon budget."""

    f_aom1: float = F_AOM1_DEFAULT
    f_aom2: float = F_AOM2_DEFAULT
    f_mix: float = F_MIX_CARRIER
    resolution_bandwidth: float = 1.0  # Hz
    photon_rate: float = 2.5e4  # detected photons / s
    quantum_efficiency: float = 0.8
    mode_matching: float = 1.0

    def __post_init__(self):
        if self.f_aom1 <= 0 or self.f_aom2 <= 0 or self.f_mix <= 0:
            raise DomainError("AOM and mixer frequencies must be positive")
        if self.resolution_bandwidth <= 0:
            raise DomainError("resolution_bandwidth must be positive")
        if self.photon_rate < 0:
            raise DomainError("photon_rate must be >= 0")
        if not 0 < self.quantum_efficiency <= 1:
            raise DomainError("quantum_efficiency must be in (0, 1]")
        if not 0 < self.mode_matching <= 1:
            raise DomainError("mode_matching must be in (0, 1]")

    @property
    def f_beat(self) -> float:
        return self.f_aom1 - self.f_aom2

    @property
    def effective_photon_rate(self) -> float:
        """mode_matching * quantum_efficiency * photon_rate, in 1/s."""
        return self.mode_matching * self.quantum_efficiency * self.photon_rate


@dataclass(frozen=True)
class SpectralLine:
    frequency: float  # Hz
    relative_power: float
    width: float = 0.0  # Hz; 0 means delta-like (RBW-limited)


@dataclass
class LineList:
    """Carrier and motional sidebands with relative powers summing to <= 1."""

    lines: list

    def __post_init__(self):
        total = 0.0
        for ln in self.lines:
            if ln.relative_power < 0:
                raise DomainError("relative powers must be >= 0")
            total += ln.relative_power
        if total > 1 + 1e-9:
            raise DomainError(f"total relative power {total} exceeds 1")

    @property
    def total_power(self) -> float:
        return float(sum(ln.relative_power for ln in self.lines))

    def power_at(self, frequency: float, tol: float = 1e-3) -> float:
        return float(
            sum(
                ln.relative_power
                for ln in self.lines
                if abs(ln.frequency - frequency) <= tol
            )
        )

    def to_json_dict(self) -> dict:
        return {
            "lines": [
                {
                    "frequency_hz": ln.frequency,
                    "relative_power": ln.relative_power,
                    "width_hz": ln.width,
                }
                for ln in self.lines
            ]
        }

    @classmethod
    def from_json_dict(cls, data: dict) -> "LineList":
        return cls(
            [
                SpectralLine(d["frequency_hz"], d["relative_power"], d.get("width_hz", 0.0))
                for d in data["lines"]
            ]
        )


def significant_order(m: float, tol: float = 1e-10) -> int:
    """Smallest n with the power outside sidebands |k| <= n below tol."""
    m = abs(m)
    if m == 0.0:
        return 0
    n = max(1, int(math.ceil(m)))
    while True:
        included = jv(0, m) ** 2 + 2 * sum(jv(k, m) ** 2 for k in range(1, n + 1))
        if 1.0 - included <= tol:
            return n
        n += 1


def compose_lines(
    m_micro: float,
    micro_order_max: int,
    f_beat: float = F_AOM1_DEFAULT - F_AOM2_DEFAULT,
    f_paul: float = F_PAUL_DEFAULT,
    macro: tuple[float, float] | None = None,
    macro_order_max: int = 1,
) -> LineList:
    """Analytic line list of the phase-modulated carrier.

    Micromotion sidebands at f_beat + n*f_paul carry |J_n(m_micro)|^2;
    with a driven macromotion (f_drive, m_macro) every line splits again
    with |J_k(m_macro)|^2 multiplied into the Bessel product.
    """
    if m_micro < 0 or micro_order_max < 0:
        raise DomainError("m_micro and micro_order_max must be >= 0")
    macro_orders = [0]
    macro_weights = {0: 1.0}
    f_drive = 0.0
    if macro is not None:
        f_drive, m_macro = macro
        if f_drive <= 0 or m_macro < 0:
            raise DomainError("macro drive frequency must be > 0 and index >= 0")
        macro_orders = list(range(-macro_order_max, macro_order_max + 1))
        macro_weights = {k: jv(k, m_macro) ** 2 for k in macro_orders}
    lines = []
    for n in range(-micro_order_max, micro_order_max + 1):
        wn = jv(n, m_micro) ** 2
        for k in macro_orders:
            power = wn * macro_weights[k]
            lines.append(SpectralLine(f_beat + n * f_paul + k * f_drive, power))
    lines.sort(key=lambda ln: ln.frequency)
    return LineList(lines)


@dataclass
class TimeSeries:
    """Real-valued photodiode samples at a fixed rate; t = (start_index+i)/fs."""

    samples: np.ndarray
    sample_rate: float
    start_index: int = 0

    @property
    def duration(self) -> float:
        return len(self.samples) / self.sample_rate

    def times(self) -> np.ndarray:
        return (self.start_index + np.arange(len(self.samples))) / self.sample_rate


def _noise_sigma(config: HeterodyneConfig, sample_rate: float, amplitude_ref: float) -> float:
    """Full-rate white-noise sigma so carrier power / PSD = effective rate."""
    rate = config.effective_photon_rate
    if rate <= 0:
        raise ConfigurationError(
            "photon_rate (and efficiencies) must be > 0 to synthesize noise"
        )
    return amplitude_ref * math.sqrt(sample_rate / (4.0 * rate))


def _required_sample_rate(f_beat, m_micro, f_paul, macro) -> float:
    n1 = significant_order(m_micro)
    f_max = f_beat + n1 * f_paul
    if macro is not None:
        f_drive, m_macro = macro
        f_max += significant_order(m_macro) * f_drive
    return 2.0 * f_max


def synthesize_timeseries(
    config: HeterodyneConfig,
    m_micro: float = 0.0,
    macro: tuple[float, float] | None = None,
    duration: float = 1e-3,
    sample_rate: float = 400e6,
    rng_seed: int = 0,
    noise: bool = True,
    amplitude: float = 1.0,
    f_paul: float = F_PAUL_DEFAULT,
    backend: str | None = None,
) -> TimeSeries:
    """Synthesize the subtracted photodiode signal.

    S(t) = A cos(2 pi f_beat t + m_micro sin(2 pi f_paul t)
           + m_macro sin(2 pi f_drive t)) + shot noise,
    with the noise variance set so that carrier power over noise power per
    hertz equals mode_matching * quantum_efficiency * photon_rate.
    Deterministic for a given seed. Memory-capped; use heterodyne_trace for
    long streaming runs.
    """
    fs_min = _required_sample_rate(config.f_beat, m_micro, f_paul, macro)
    if sample_rate <= fs_min:
        raise ConfigurationError(
            f"sample_rate {sample_rate:.4g} Hz aliases the signal; "
            f"need > {fs_min:.4g} Hz for these modulation indices"
        )
    n = int(round(duration * sample_rate))
    if n <= 0:
        raise ConfigurationError("duration too short for one sample")
    if n > MAX_SAMPLES_IN_MEMORY:
        raise ConfigurationError(
            f"{n} samples exceed the in-memory budget ({MAX_SAMPLES_IN_MEMORY}); "
            "use heterodyne_trace for streaming synthesis"
        )
    kern = get_backend(backend)
    f_drive, m_macro = macro if macro is not None else (0.0, 0.0)
    out = np.empty(n, dtype=np.float64)
    dt = 1.0 / sample_rate
    rng = np.random.default_rng(rng_seed)
    sigma = _noise_sigma(config, sample_rate, amplitude if amplitude > 0 else 1.0) if noise else 0.0
    for i0 in range(0, n, _CHUNK_TARGET):
        nn = min(_CHUNK_TARGET, n - i0)
        kern.synth_real(
            i0, nn, dt, amplitude, config.f_beat, m_micro, f_paul, m_macro, f_drive,
            out[i0 : i0 + nn],
        )
        if sigma > 0:
            out[i0 : i0 + nn] += sigma * rng.standard_normal(nn)
    return TimeSeries(out, sample_rate)


# ---------------------------------------------------------------------------
# Digital down-conversion planning


@dataclass(frozen=True)
class _DdcStage:
    taps: np.ndarray
    down: int


@dataclass(frozen=True)
class _DdcPlan:
    stages: tuple
    input_rate: float
    output_rate: float
    cutoff: float

    @property
    def total_down(self) -> int:
        d = 1
        for st in self.stages:
            d *= st.down
        return d


def _stage_factors(d: int) -> list[int]:
    factors = []
    while d > 1:
        best = None
        for cand in range(min(d, 16), 1, -1):
            if d % cand == 0:
                best = cand
                break
        if best is None:  # prime > 16
            best = d
        factors.append(best)
        d //= best
    return factors


def _plan_ddc(
    sample_rate: float,
    target_rate: float = 256e3,
    cutoff: float | None = None,
    attenuation_db: float = 80.0,
) -> _DdcPlan:
    down = max(1, int(round(sample_rate / target_rate)))
    out_rate = sample_rate / down
    if cutoff is None:
        cutoff = min(LOWPASS_CUTOFF_MAX, 0.4 * out_rate)
    if cutoff > LOWPASS_CUTOFF_MAX + 1e-9:
        raise ConfigurationError(
            f"low-pass cutoff {cutoff:.3g} Hz exceeds the {LOWPASS_CUTOFF_MAX:.0f} Hz chain limit"
        )
    if down > 1 and out_rate < 2.05 * cutoff:
        raise ConfigurationError(
            f"decimated rate {out_rate:.4g} Hz cannot carry a {cutoff:.4g} Hz band"
        )
    stages = []
    f_in = sample_rate
    for d in _stage_factors(down):
        f_out = f_in / d
        stop = f_out - cutoff
        width = stop - cutoff
        if width <= 0:
            raise ConfigurationError("filter transition band collapsed; lower the cutoff")
        numtaps, beta = kaiserord(attenuation_db, width / (f_in / 2))
        numtaps = max(numtaps, 9)
        taps = firwin(numtaps, (cutoff + stop) / 2, window=("kaiser", beta), fs=f_in)
        stages.append(_DdcStage(taps, d))
        f_in = f_out
    return _DdcPlan(tuple(stages), sample_rate, out_rate, cutoff)


class _SegmentedPeriodogram:
    """RMS-averaged, tone-calibrated periodogram built from streamed chunks."""

    def __init__(self, n_seg: int, window_name: str):
        self.n = n_seg
        self.window_name = window_name
        if window_name in ("rect", "rectangular", "boxcar"):
            self.w = np.ones(n_seg)
        else:
            self.w = get_window(window_name, n_seg, fftbins=True)
        self.wsum = float(self.w.sum())
        self.enbw_bins = float(n_seg * np.sum(self.w**2) / self.wsum**2)
        self.buf = np.empty(n_seg, dtype=np.complex128)
        self.fill = 0
        self.power = np.zeros(n_seg)
        self.count = 0

    def add(self, chunk: np.ndarray):
        pos = 0
        while pos < len(chunk):
            take = min(self.n - self.fill, len(chunk) - pos)
            self.buf[self.fill : self.fill + take] = chunk[pos : pos + take]
            self.fill += take
            pos += take
            if self.fill == self.n:
                spec = np.fft.fft(self.buf * self.w)
                self.power += spec.real**2 + spec.imag**2
                self.count += 1
                self.fill = 0

    def result(self) -> np.ndarray:
        if self.count == 0:
            raise ResolutionError("not enough samples for a single segment at this RBW")
        return self.power / (self.count * self.wsum**2)


def _window_enbw_factor(window_name: str) -> float:
    if window_name in ("rect", "rectangular", "boxcar"):
        return 1.0
    w = get_window(window_name, 4096, fftbins=True)
    return float(4096 * np.sum(w**2) / w.sum() ** 2)


def _segment_length(fs_d: float, rbw: float, window_name: str, align: int = 1) -> int:
    n = int(round(_window_enbw_factor(window_name) * fs_d / rbw))
    if align > 1:
        n = max(align, int(round(n / align)) * align)
    return max(n, 8)


@dataclass
class SpectrumTrace:
    """Frequency-binned power (linear, tone-calibrated) with its RBW."""

    bin_centers: np.ndarray  # Hz, offset frequency after mixing
    power: np.ndarray  # linear
    resolution_bandwidth: float  # Hz
    noise_floor: float  # linear per-bin estimate
    window: str = "hann"
    averages: int = 1
    seed: int | None = None
    config_echo: dict = field(default_factory=dict)

    DB_FLOOR = -400.0

    @property
    def power_db(self) -> np.ndarray:
        safe = np.maximum(self.power, 10 ** (self.DB_FLOOR / 10))
        return 10 * np.log10(safe)

    @property
    def noise_floor_db(self) -> float:
        return 10 * math.log10(max(self.noise_floor, 10 ** (self.DB_FLOOR / 10)))

    def peak(self) -> tuple[float, float, int]:
        i = int(np.argmax(self.power))
        return float(self.bin_centers[i]), float(self.power[i]), i

    def estimate_noise_floor(self, exclude_bins: int = 3) -> float:
        """Mean noise bin, excluding the peak neighborhood and strong lines."""
        _, _, ipk = self.peak()
        mask = np.ones(len(self.power), dtype=bool)
        lo, hi = max(0, ipk - exclude_bins), min(len(self.power), ipk + exclude_bins + 1)
        mask[lo:hi] = False
        rest = self.power[mask]
        if rest.size == 0:
            return float("nan")
        med = np.median(rest)
        rest = rest[rest < 100 * max(med, 1e-300)]
        return float(rest.mean()) if rest.size else float(med)

    def measured_snr_db(self, exclude_bins: int = 3) -> float:
        """Peak bin over mean noise bin, in dB."""
        _, pk, _ = self.peak()
        floor = self.estimate_noise_floor(exclude_bins)
        return 10 * math.log10(pk / floor)

    def bins_above(self, threshold_db: float) -> np.ndarray:
        """Indices of bins at least threshold_db above the stored noise floor."""
        return np.nonzero(self.power >= self.noise_floor * 10 ** (threshold_db / 10))[0]

    def save_csv(self, path):
        with open(path, "w") as fh:
            fh.write("# trapspec spectrum trace\n")
            fh.write(f"# rbw_hz = {self.resolution_bandwidth!r}\n")
            fh.write(f"# noise_floor_db = {self.noise_floor_db!r}\n")
            fh.write(f"# seed = {self.seed!r}\n")
            fh.write(f"# window = {self.window}\n")
            fh.write(f"# averages = {self.averages}\n")
            fh.write("freq_hz,power_db\n")
            for f, p in zip(self.bin_centers, self.power_db):
                fh.write(f"{f:.10g},{p:.10g}\n")

    @classmethod
    def load_csv(cls, path) -> "SpectrumTrace":
        header = {}
        freqs, pdb = [], []
        with open(path) as fh:
            for line in fh:
                line = line.strip()
                if not line:
                    continue
                if line.startswith("#"):
                    if "=" in line:
                        key, val = line[1:].split("=", 1)
                        header[key.strip()] = val.strip()
                    continue
                if line.startswith("freq_hz"):
                    continue
                f, p = line.split(",")
                freqs.append(float(f))
                pdb.append(float(p))
        power = 10 ** (np.asarray(pdb) / 10)
        rbw = float(header.get("rbw_hz", "nan"))
        floor_db = float(header.get("noise_floor_db", "nan"))
        seed = header.get("seed")
        seed = None if seed in (None, "None") else int(seed)
        return cls(
            np.asarray(freqs),
            power,
            rbw,
            10 ** (floor_db / 10) if math.isfinite(floor_db) else float("nan"),
            window=header.get("window", "unknown"),
            averages=int(header.get("averages", "1")),
            seed=seed,
        )


def _finalize_trace(
    power_full: np.ndarray,
    fs_d: float,
    n_seg: int,
    rbw: float,
    window: str,
    averages: int,
    seed,
    span,
    two_sided: bool,
    echo: dict,
) -> SpectrumTrace:
    freqs = np.fft.fftfreq(n_seg, d=1.0 / fs_d)
    if two_sided:
        order = np.argsort(freqs)
        freqs, power = freqs[order], power_full[order]
    else:
        half = n_seg // 2
        freqs, power = freqs[:half], power_full[:half]
    if span is not None:
        lo, hi = span
        sel = (freqs >= lo) & (freqs <= hi)
        if not np.any(sel):
            raise ConfigurationError("requested span contains no bins")
        freqs, power = freqs[sel], power[sel]
    trace = SpectrumTrace(
        np.ascontiguousarray(freqs),
        np.ascontiguousarray(power),
        rbw,
        0.0,
        window=window,
        averages=averages,
        seed=seed,
        config_echo=echo,
    )
    trace.noise_floor = trace.estimate_noise_floor()
    return trace


def analyzer(
    ts: TimeSeries,
    config: HeterodyneConfig,
    window: str = "hann",
    target_rate: float = 256e3,
    cutoff: float | None = None,
    span: tuple[float, float] | None = None,
    two_sided: bool = False,
    backend: str | None = None,
) -> SpectrumTrace:
    """Mixer + low-pass + FFT analyzer applied to an in-memory time series.

    The mixer is a quadrature digital down-converter at f_mix (image-free,
    so the displayed peak-to-floor ratio matches the photon budget); the
    anti-alias low-pass (cutoff <= 100 kHz) precedes decimation, and
    non-overlapping windowed segments sized by the configured resolution
    bandwidth are RMS-averaged.
    """
    fs = ts.sample_rate
    if config.f_mix >= fs / 2:
        raise ConfigurationError(
            f"f_mix {config.f_mix:.4g} Hz is outside Nyquist for fs {fs:.4g} Hz"
        )
    rbw = config.resolution_bandwidth
    if rbw < 1.0 / ts.duration:
        raise ResolutionError(
            f"RBW {rbw} Hz needs at least {1.0 / rbw:.3g} s of data, got {ts.duration:.3g} s"
        )
    kern = get_backend(backend)
    plan = _plan_ddc(fs, target_rate=min(target_rate, fs), cutoff=cutoff)
    d_total = plan.total_down
    n_use = (len(ts.samples) // d_total) * d_total
    n_seg = _segment_length(plan.output_rate, rbw, window)
    if n_seg > n_use // d_total:
        raise ResolutionError(
            f"RBW {rbw} Hz requires {n_seg} decimated samples; only {n_use // d_total} available"
        )
    acc = _SegmentedPeriodogram(n_seg, window)
    decims = [kern.FirDecimator(st.taps, st.down) for st in plan.stages]
    dt = 1.0 / fs
    chunk = d_total * max(1, _CHUNK_TARGET // d_total)
    zbuf = np.empty(chunk, dtype=np.complex128)
    for i0 in range(0, n_use, chunk):
        nn = min(chunk, n_use - i0)
        z = kern.mix(ts.start_index + i0, nn, dt, config.f_mix, ts.samples[i0 : i0 + nn], zbuf[:nn])
        for dec in decims:
            z = dec.process(z)
        acc.add(z)
    power = acc.result()
    rbw_actual = acc.enbw_bins * plan.output_rate / n_seg
    echo = {
        "f_mix_hz": config.f_mix,
        "sample_rate_hz": fs,
        "decimated_rate_hz": plan.output_rate,
        "cutoff_hz": plan.cutoff,
        "mode": "analyzer",
        "backend": kern.BACKEND_NAME,
    }
    return _finalize_trace(
        power, plan.output_rate, n_seg, rbw_actual, window, acc.count, None, span, two_sided, echo
    )


def periodogram_trace(ts: TimeSeries, window: str = "rect") -> SpectrumTrace:
    """Tone-calibrated periodogram of the raw real series (no mixing).

    Used to read sideband/carrier ratios directly at the full rate; a
    bin-centered tone of amplitude A reads A^2/2.
    """
    n = len(ts.samples)
    if window in ("rect", "rectangular", "boxcar"):
        w = np.ones(n)
    else:
        w = get_window(window, n, fftbins=True)
    spec = np.fft.rfft(ts.samples * w)
    power = 2.0 * (spec.real**2 + spec.imag**2) / w.sum() ** 2
    power[0] /= 2.0
    if n % 2 == 0:
        power[-1] /= 2.0
    freqs = np.fft.rfftfreq(n, d=1.0 / ts.sample_rate)
    enbw = float(n * np.sum(w**2) / w.sum() ** 2)
    trace = SpectrumTrace(
        freqs, power, enbw * ts.sample_rate / n, 0.0, window=window, averages=1
    )
    trace.noise_floor = trace.estimate_noise_floor()
    return trace


def _inband_lines(
    config: HeterodyneConfig,
    amplitude: float,
    m_micro: float,
    f_paul: float,
    macro,
    band: float,
) -> list[tuple[float, complex]]:
    """(offset frequency, complex amplitude) of lines inside the analysis band."""
    f_drive, m_macro = macro if macro is not None else (0.0, 0.0)
    n1 = significant_order(m_micro) if m_micro else 0
    n2 = significant_order(m_macro) if m_macro else 0
    out = []
    for n in range(-n1, n1 + 1):
        for k in range(-n2, n2 + 1):
            offset = config.f_beat + n * f_paul + k * f_drive - config.f_mix
            if abs(offset) <= band:
                amp = 0.5 * amplitude * jv(n, m_micro) * jv(k, m_macro)
                out.append((offset, complex(amp)))
    return out


def heterodyne_trace(
    config: HeterodyneConfig,
    m_micro: float = 0.0,
    macro: tuple[float, float] | None = None,
    averages: int = 1,
    sample_rate: float = 65.536e6,
    rng_seed: int = 0,
    mode: str = "auto",
    window: str = "hann",
    span: tuple[float, float] | None = None,
    target_rate: float = 256e3,
    cutoff: float | None = None,
    amplitude: float = 1.0,
    noise: bool = True,
    f_paul: float = F_PAUL_DEFAULT,
    two_sided: bool = False,
    backend: str | None = None,
    bin_align: int = 1,
) -> SpectrumTrace:
    """End-to-end synthesized analyzer trace (streaming; arbitrary RBW).

    mode='full' streams the real full-rate signal through the mixer and
    decimation chain; mode='baseband' synthesizes the equivalent complex
    baseband directly at the decimated rate (in-band lines plus calibrated
    white noise), which is exact for this signal class and much faster at
    sub-hertz RBW. 'auto' picks 'full' when the total sample count is
    modest. bin_align forces the segment length to a multiple, letting
    recipes center a known tone exactly on a bin.
    """
    if averages < 1:
        raise ConfigurationError("averages must be >= 1")
    rbw = config.resolution_bandwidth
    kern = get_backend(backend)
    if mode not in ("auto", "full", "baseband"):
        raise ConfigurationError(f"unknown mode {mode!r}")
    if mode == "auto":
        est_full = averages * sample_rate / rbw
        mode = "full" if est_full <= 2**28 else "baseband"
    rng = np.random.default_rng(rng_seed)
    echo = {
        "f_mix_hz": config.f_mix,
        "f_beat_hz": config.f_beat,
        "m_micro": m_micro,
        "macro": list(macro) if macro else None,
        "mode": mode,
        "backend": kern.BACKEND_NAME,
        "rbw_request_hz": rbw,
        "averages": averages,
        "amplitude": amplitude,
        "noise": noise,
        "effective_photon_rate_hz": config.effective_photon_rate,
    }

    if mode == "full":
        fs = sample_rate
        fs_min = _required_sample_rate(config.f_beat, m_micro, f_paul, macro)
        if fs <= fs_min:
            raise ConfigurationError(
                f"sample_rate {fs:.4g} Hz aliases the signal; need > {fs_min:.4g} Hz"
            )
        if config.f_mix >= fs / 2:
            raise ConfigurationError("f_mix is outside Nyquist at this sample rate")
        plan = _plan_ddc(fs, target_rate=target_rate, cutoff=cutoff)
        fs_d = plan.output_rate
        d_total = plan.total_down
        n_seg = _segment_length(fs_d, rbw, window, align=bin_align)
        n_full = averages * n_seg * d_total
        sigma = _noise_sigma(config, fs, amplitude if amplitude > 0 else 1.0) if noise else 0.0
        acc = _SegmentedPeriodogram(n_seg, window)
        decims = [kern.FirDecimator(st.taps, st.down) for st in plan.stages]
        dt = 1.0 / fs
        f_drive, m_macro = macro if macro is not None else (0.0, 0.0)
        chunk = d_total * max(1, _CHUNK_TARGET // d_total)
        zbuf = np.empty(chunk, dtype=np.complex128)
        for i0 in range(0, n_full, chunk):
            nn = min(chunk, n_full - i0)
            noise_chunk = sigma * rng.standard_normal(nn) if sigma > 0 else None
            z = kern.synth_mix(
                i0, nn, dt, amplitude, config.f_beat, m_micro, f_paul,
                m_macro, f_drive, config.f_mix, noise_chunk, zbuf[:nn],
            )
            for dec in decims:
                z = dec.process(z)
            acc.add(z)
        power = acc.result()
        rbw_actual = acc.enbw_bins * fs_d / n_seg
        echo.update(
            {
                "sample_rate_hz": fs,
                "decimated_rate_hz": fs_d,
                "cutoff_hz": plan.cutoff,
            }
        )
        return _finalize_trace(
            power, fs_d, n_seg, rbw_actual, window, acc.count, rng_seed, span, two_sided, echo
        )

    # Equivalent-baseband synthesis at the decimated rate.
    fs_d = target_rate
    band = min(cutoff or LOWPASS_CUTOFF_MAX, 0.48 * fs_d)
    n_seg = _segment_length(fs_d, rbw, window, align=bin_align)
    lines = _inband_lines(config, amplitude, m_micro, f_paul, macro, band)
    sigma_c = 0.0
    if noise:
        ref = amplitude if amplitude > 0 else 1.0
        rate = config.effective_photon_rate
        if rate <= 0:
            raise ConfigurationError("photon_rate must be > 0 to synthesize noise")
        sigma_c = ref * math.sqrt(fs_d / (4.0 * rate))  # E|n|^2 of complex noise
    acc = _SegmentedPeriodogram(n_seg, window)
    for seg in range(averages):
        base = seg * n_seg
        idx = base + np.arange(n_seg, dtype=np.float64)
        z = np.zeros(n_seg, dtype=np.complex128)
        for offset, amp in lines:
            z += amp * np.exp((2j * math.pi * offset / fs_d) * idx)
        if sigma_c > 0:
            g = rng.standard_normal(2 * n_seg)
            z += (sigma_c / math.sqrt(2.0)) * (g[:n_seg] + 1j * g[n_seg:])
        acc.add(z)
    power = acc.result()
    rbw_actual = acc.enbw_bins * fs_d / n_seg
    echo.update({"decimated_rate_hz": fs_d, "band_hz": band})
    return _finalize_trace(
        power, fs_d, n_seg, rbw_actual, window, acc.count, rng_seed, span, two_sided, echo
    )


def snr_budget(config: HeterodyneConfig) -> float:
    """Maximum SNR in dB at the configured RBW: 10 log10(eta*N / RBW)."""
    if config.photon_rate <= 0:
        raise DomainError("photon_rate must be positive for an SNR budget")
    return 10 * math.log10(config.effective_photon_rate / config.resolution_bandwidth)


def min_detectable_micromotion(
    config: HeterodyneConfig,
    geometry: ExperimentGeometry | None = None,
    wavelength: float = 493.4e-9,
    a_direction=None,
) -> float:
    """Smallest detectable micromotion amplitude in meters.

    The first sideband reaches the per-bin noise power when m = 2*10^(-SNR/20)
    (small-m limit: sideband power is (m/2)^2 of the carrier). The amplitude
    follows from projecting onto k_d - k_l; a motion orthogonal to that
    difference vector is undetectable and reported as infinity.
    """
    snr_db = snr_budget(config)
    if snr_db < 0:
        raise ConfigurationError("SNR budget below 0 dB; no detection threshold")
    m_min = 2.0 * 10 ** (-snr_db / 20)
    k_l, k_d = detection_wave_vectors(geometry, wavelength)
    diff = k_d - k_l
    norm = np.linalg.norm(diff)
    if norm < 1e-12:
        return float("inf")
    if a_direction is None:
        proj = norm
    else:
        a_dir = np.asarray(a_direction, dtype=float)
        a_dir = a_dir / np.linalg.norm(a_dir)
        proj = abs(float(np.dot(a_dir, diff)))
        if proj < 1e-9 * norm:
            return float("inf")
    return m_min / proj


# ---------------------------------------------------------------------------
# Figure-style recipes


def _aligned_fs_and_nseg(fs_d: float, offset: float, rbw: float, window: str) -> tuple[int, int]:
    """Segment alignment that puts `offset` exactly on a bin center."""
    align = int(round(fs_d)) // math.gcd(int(round(fs_d)), int(round(offset)))
    n_seg = _segment_length(fs_d, rbw, window, align=align)
    return align, n_seg


def elastic_peak_trace(
    snr_per_hz_db: float = 17.0,
    rbw: float = 0.061,
    averages: int = 24,
    rng_seed: int = 0,
    span_hz: float = 10.0,
    mode: str = "baseband",
    window: str = "rect",
    quantum_efficiency: float = 0.8,
    backend: str | None = None,
) -> SpectrumTrace:
    """Carrier-only heterodyne trace around 50 kHz (the published Fig.-2 setting).

    The photon budget is set so the displayed carrier-to-floor ratio is
    snr_per_hz_db at 1 Hz; all rf frequencies are grid-locked so the elastic
    peak occupies a single RBW-limited bin at exactly 50 kHz. The rectangular
    window mirrors the phase-locked instrument (no scalloping for a
    bin-centered tone).
    """
    rate = 10 ** (snr_per_hz_db / 10)
    config = HeterodyneConfig(
        f_mix=F_MIX_CARRIER,
        resolution_bandwidth=rbw,
        photon_rate=rate / quantum_efficiency,
        quantum_efficiency=quantum_efficiency,
        mode_matching=1.0,
    )
    fs_d = 163840.0
    offset = config.f_beat - config.f_mix  # 50 kHz
    align, _ = _aligned_fs_and_nseg(fs_d, offset, rbw, window)
    return heterodyne_trace(
        config,
        m_micro=0.0,
        averages=averages,
        sample_rate=fs_d * 400,  # 65.536 MHz when the full chain is used
        rng_seed=rng_seed,
        mode=mode,
        window=window,
        span=(offset - span_hz, offset + span_hz),
        target_rate=fs_d,
        bin_align=align,
        backend=backend,
    )


def micromotion_sideband_trace(
    order: int = +1,
    m_micro: float = 0.47,
    rbw: float = 16.0,
    averages: int = 1,
    rng_seed: int = 0,
    span_hz: float = 2000.0,
    photon_rate: float = 1.25e5,
    mode: str = "full",
    window: str = "rect",
    f_paul: float = F_PAUL_DEFAULT,
    backend: str | None = None,
) -> SpectrumTrace:
    """Micromotion sideband (or carrier, order=0) trace, Fig.-3 style.

    The analyzer frequency is shifted by order * f_paul so the selected
    sideband lands at 50 kHz; phase lock keeps it RBW-limited.
    """
    config = HeterodyneConfig(
        f_mix=F_MIX_CARRIER + order * f_paul,
        resolution_bandwidth=rbw,
        photon_rate=photon_rate,
    )
    fs_d = 163840.0
    line = config.f_beat + order * f_paul
    offset = line - config.f_mix  # 50 kHz
    align, _ = _aligned_fs_and_nseg(fs_d, offset, rbw, window)
    return heterodyne_trace(
        config,
        m_micro=m_micro,
        averages=averages,
        sample_rate=fs_d * 2000,  # 327.68 MHz covers the significant sidebands
        rng_seed=rng_seed,
        mode=mode,
        window=window,
        span=(offset - span_hz, offset + span_hz),
        target_rate=fs_d,
        f_paul=f_paul,
        bin_align=align,
        backend=backend,
    )
