"""Hot-kernel backend selection: compiled extension with NumPy fallback.

The Cython extension is built by setup.py when a compiler is available;
otherwise (or when forced with the TRAPSPEC_BACKEND environment variable)
the NumPy implementation is used. Both expose the same chunk-level
primitives: synth_real, mix, synth_mix, FirDecimator.
"""

from __future__ import annotations

import os

from ..errors import ConfigurationError
from . import _dsp_np as numpy_backend

try:
    from . import _dsp_cy as cython_backend

    HAVE_CYTHON = True
except ImportError:  # extension not built; pure-Python install
    cython_backend = None
    HAVE_CYTHON = False


def default_backend_name() -> str:
    forced = os.environ.get("TRAPSPEC_BACKEND")
    if forced:
        return forced
    return "cython" if HAVE_CYTHON else "numpy"


def get_backend(name: str | None = None):
    """Resolve a backend module by name; None means the default selection."""
    name = name or default_backend_name()
    if name == "cython":
        if not HAVE_CYTHON:
            raise ConfigurationError(
                "cython backend requested but the compiled extension is not available"
            )
        return cython_backend
    if name == "numpy":
        return numpy_backend
    raise ConfigurationError(f"unknown backend {name!r}; expected 'cython' or 'numpy'")


def available_backends() -> list[str]:
    return ["cython", "numpy"] if HAVE_CYTHON else ["numpy"]
