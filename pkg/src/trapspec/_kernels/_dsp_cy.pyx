# cython: boundscheck=False, wraparound=False, cdivision=True, language_level=3
"""Compiled implementation of the hot DSP kernels.

Same contracts as ``_dsp_np``: phase-modulated synthesis, complex
down-mixing, and streaming FIR decimation, written as fused single-pass
loops. Oscillators use complex-rotation recurrences that are re-seeded at
every chunk boundary, so phase drift stays below ~1e-10 rad per chunk.
"""

import numpy as np

cimport numpy as cnp
from libc.math cimport cos, sin, fmod, M_PI


cdef inline double _phase0(double w, long long i0) noexcept:
    # Reduce w*i0 without forming the huge product in one step.
    cdef double red = fmod(w, 2.0 * M_PI)
    return fmod(red * <double> i0, 2.0 * M_PI)


BACKEND_NAME = "cython"


def synth_real(long long i0, Py_ssize_t n, double dt, double amplitude,
               double f_carrier, double m1, double f_mod1, double m2,
               double f_mod2, double[::1] out):
    cdef double wc = 2.0 * M_PI * f_carrier * dt
    cdef double w1 = 2.0 * M_PI * f_mod1 * dt
    cdef double w2 = 2.0 * M_PI * f_mod2 * dt
    cdef double cc = cos(_phase0(wc, i0)), sc = sin(_phase0(wc, i0))
    cdef double c1 = cos(_phase0(w1, i0)), s1 = sin(_phase0(w1, i0))
    cdef double c2 = cos(_phase0(w2, i0)), s2 = sin(_phase0(w2, i0))
    cdef double dcc = cos(wc), dsc = sin(wc)
    cdef double dc1 = cos(w1), ds1 = sin(w1)
    cdef double dc2 = cos(w2), ds2 = sin(w2)
    cdef double b, cb, sb, tmp
    cdef Py_ssize_t j
    cdef bint mod1 = m1 != 0.0, mod2 = m2 != 0.0
    for j in range(n):
        if mod1 or mod2:
            b = 0.0
            if mod1:
                b += m1 * s1
            if mod2:
                b += m2 * s2
            cb = cos(b)
            sb = sin(b)
            out[j] = amplitude * (cc * cb - sc * sb)
        else:
            out[j] = amplitude * cc
        tmp = cc * dcc - sc * dsc
        sc = sc * dcc + cc * dsc
        cc = tmp
        if mod1:
            tmp = c1 * dc1 - s1 * ds1
            s1 = s1 * dc1 + c1 * ds1
            c1 = tmp
        if mod2:
            tmp = c2 * dc2 - s2 * ds2
            s2 = s2 * dc2 + c2 * ds2
            c2 = tmp
    return np.asarray(out)


def mix(long long i0, Py_ssize_t n, double dt, double f_mix,
        double[::1] samples, double complex[::1] out):
    cdef double wm = 2.0 * M_PI * f_mix * dt
    cdef double cm = cos(_phase0(wm, i0)), sm = sin(_phase0(wm, i0))
    cdef double dcm = cos(wm), dsm = sin(wm)
    cdef double tmp, v
    cdef Py_ssize_t j
    for j in range(n):
        v = samples[j]
        out[j].real = v * cm
        out[j].imag = -v * sm
        tmp = cm * dcm - sm * dsm
        sm = sm * dcm + cm * dsm
        cm = tmp
    return np.asarray(out)


def synth_mix(long long i0, Py_ssize_t n, double dt, double amplitude,
              double f_carrier, double m1, double f_mod1, double m2,
              double f_mod2, double f_mix, noise, double complex[::1] out):
    cdef double wc = 2.0 * M_PI * f_carrier * dt
    cdef double w1 = 2.0 * M_PI * f_mod1 * dt
    cdef double w2 = 2.0 * M_PI * f_mod2 * dt
    cdef double wm = 2.0 * M_PI * f_mix * dt
    cdef double cc = cos(_phase0(wc, i0)), sc = sin(_phase0(wc, i0))
    cdef double c1 = cos(_phase0(w1, i0)), s1 = sin(_phase0(w1, i0))
    cdef double c2 = cos(_phase0(w2, i0)), s2 = sin(_phase0(w2, i0))
    cdef double cm = cos(_phase0(wm, i0)), sm = sin(_phase0(wm, i0))
    cdef double dcc = cos(wc), dsc = sin(wc)
    cdef double dc1 = cos(w1), ds1 = sin(w1)
    cdef double dc2 = cos(w2), ds2 = sin(w2)
    cdef double dcm = cos(wm), dsm = sin(wm)
    cdef double b, cb, sb, tmp, v
    cdef Py_ssize_t j
    cdef bint mod1 = m1 != 0.0, mod2 = m2 != 0.0
    cdef bint have_noise = noise is not None
    cdef double[::1] nz
    if have_noise:
        nz = noise
    for j in range(n):
        if mod1 or mod2:
            b = 0.0
            if mod1:
                b += m1 * s1
            if mod2:
                b += m2 * s2
            cb = cos(b)
            sb = sin(b)
            v = amplitude * (cc * cb - sc * sb)
        else:
            v = amplitude * cc
        if have_noise:
            v += nz[j]
        out[j].real = v * cm
        out[j].imag = -v * sm
        tmp = cc * dcc - sc * dsc
        sc = sc * dcc + cc * dsc
        cc = tmp
        if mod1:
            tmp = c1 * dc1 - s1 * ds1
            s1 = s1 * dc1 + c1 * ds1
            c1 = tmp
        if mod2:
            tmp = c2 * dc2 - s2 * ds2
            s2 = s2 * dc2 + c2 * ds2
            c2 = tmp
        tmp = cm * dcm - sm * dsm
        sm = sm * dcm + cm * dsm
        cm = tmp
    return np.asarray(out)


cdef class FirDecimator:
    """Streaming FIR decimator, y[k] = sum_j h[j] x[kD - j]; see _dsp_np."""

    cdef double[::1] taps
    cdef cnp.complex128_t[::1] hist
    cdef Py_ssize_t ntaps, down, hist_len

    def __init__(self, taps, down):
        self.taps = np.ascontiguousarray(taps, dtype=np.float64)
        self.ntaps = self.taps.shape[0]
        if down < 1:
            raise ValueError("decimation factor must be >= 1")
        self.down = down
        self.hist_len = ((self.ntaps - 1 + self.down - 1) // self.down) * self.down
        self.hist = np.zeros(self.hist_len, dtype=np.complex128)

    def process(self, chunk):
        cdef cnp.complex128_t[::1] cbuf = np.ascontiguousarray(chunk, dtype=np.complex128)
        cdef Py_ssize_t lc = cbuf.shape[0]
        if lc % self.down != 0:
            raise ValueError("chunk length must be divisible by the decimation factor")
        cdef cnp.ndarray ext_arr = np.empty(self.hist_len + lc, dtype=np.complex128)
        cdef cnp.complex128_t[::1] ext = ext_arr
        cdef Py_ssize_t j, p, base
        for j in range(self.hist_len):
            ext[j] = self.hist[j]
        for j in range(lc):
            ext[self.hist_len + j] = cbuf[j]
        cdef Py_ssize_t nout = lc // self.down
        cdef cnp.ndarray out_arr = np.empty(nout, dtype=np.complex128)
        cdef cnp.complex128_t[::1] out = out_arr
        cdef double complex acc
        for p in range(nout):
            base = p * self.down + self.hist_len
            acc = 0
            for j in range(self.ntaps):
                acc = acc + self.taps[j] * ext[base - j]
            out[p] = acc
        if self.hist_len:
            self.hist = ext_arr[ext_arr.shape[0] - self.hist_len :].copy()
        return out_arr
