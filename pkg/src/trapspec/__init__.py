"""Heterodyne resonance-fluorescence toolkit for a single trapped Ba+ ion.

Subpackages cover the atomic data (:mod:`trapspec.atom`), the eight-level
Bloch equations (:mod:`trapspec.bloch`), the ion's classical motion and
cooling rate (:mod:`trapspec.motion`), heterodyne signal synthesis and the
FFT spectrum analyzer (:mod:`trapspec.spectrum`), and least-squares recovery
of the fitted quantities (:mod:`trapspec.fit`). The `trapspec` console
script ties everything into reproducible runs.
"""

__version__ = "0.1.0"

from . import atom, bloch, errors, fit, motion, spectrum  # noqa: F401
