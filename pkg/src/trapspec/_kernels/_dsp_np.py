"""NumPy implementation of the hot DSP kernels.

Chunk-level primitives used by the heterodyne synthesis/analysis pipeline:
phase-modulated carrier synthesis, complex down-mixing, and streaming
polyphase FIR decimation. The compiled twin in ``_dsp_cy`` implements the
same contracts; results agree to floating-point reassociation level.
"""

from __future__ import annotations

import math

import numpy as np
from scipy.signal import upfirdn

BACKEND_NAME = "numpy"


def synth_real(i0, n, dt, amplitude, f_carrier, m1, f_mod1, m2, f_mod2, out):
    """Fill out[j] with A*cos(w_c t + m1 sin(w_1 t) + m2 sin(w_2 t)), t=(i0+j)dt."""
    idx = np.arange(i0, i0 + n, dtype=np.float64)
    phase = (2 * math.pi * f_carrier * dt) * idx
    if m1 != 0.0:
        phase += m1 * np.sin((2 * math.pi * f_mod1 * dt) * idx)
    if m2 != 0.0:
        phase += m2 * np.sin((2 * math.pi * f_mod2 * dt) * idx)
    np.cos(phase, out=out)
    if amplitude != 1.0:
        out *= amplitude
    return out


def mix(i0, n, dt, f_mix, samples, out):
    """out[j] = samples[j] * exp(-i w_mix t): complex down-conversion."""
    idx = np.arange(i0, i0 + n, dtype=np.float64)
    phase = (2 * math.pi * f_mix * dt) * idx
    np.multiply(samples, np.cos(phase), out=out.real)
    np.multiply(samples, np.sin(phase), out=out.imag)
    np.negative(out.imag, out=out.imag)
    return out


def synth_mix(i0, n, dt, amplitude, f_carrier, m1, f_mod1, m2, f_mod2, f_mix, noise, out):
    """Fused synthesis + optional additive noise + complex down-mixing."""
    buf = np.empty(n, dtype=np.float64)
    synth_real(i0, n, dt, amplitude, f_carrier, m1, f_mod1, m2, f_mod2, buf)
    if noise is not None:
        buf += noise
    return mix(i0, n, dt, f_mix, buf, out)


class FirDecimator:
    """Streaming polyphase FIR decimator: y[k] = sum_j h[j] x[kD - j].

    Chunks must have a length divisible by the decimation factor; the
    history needed across chunk boundaries is kept internally, so feeding
    the same samples in any chunking yields the same output stream.
    """

    def __init__(self, taps, down: int):
        self.taps = np.ascontiguousarray(taps, dtype=np.float64)
        if down < 1:
            raise ValueError("decimation factor must be >= 1")
        self.down = int(down)
        self.hist_len = ((len(self.taps) - 1 + self.down - 1) // self.down) * self.down
        self.hist = np.zeros(self.hist_len, dtype=np.complex128)

    def process(self, chunk: np.ndarray) -> np.ndarray:
        chunk = np.asarray(chunk, dtype=np.complex128)
        if len(chunk) % self.down != 0:
            raise ValueError("chunk length must be divisible by the decimation factor")
        ext = np.concatenate([self.hist, chunk])
        full = upfirdn(self.taps, ext, up=1, down=self.down)
        skip = self.hist_len // self.down
        out = full[skip : skip + len(chunk) // self.down]
        if self.hist_len:
            self.hist = ext[len(ext) - self.hist_len :].copy()
        return np.ascontiguousarray(out)
