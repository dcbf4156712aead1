"""Build script: compiles the optional Cython DSP kernels.

The package works without the extension (a NumPy fallback is selected at
import time); the compiled kernels speed up full-rate heterodyne synthesis
and down-conversion by roughly 3-10x.
"""

from setuptools import Extension, setup

try:
    import numpy as np
    from Cython.Build import cythonize

    extensions = cythonize(
        [
            Extension(
                "trapspec._kernels._dsp_cy",
                ["src/trapspec/_kernels/_dsp_cy.pyx"],
                include_dirs=[np.get_include()],
                define_macros=[("NPY_NO_DEPRECATED_API", "NPY_1_7_API_VERSION")],
                extra_compile_args=["-O3"],
            )
        ],
        language_level=3,
    )
except ImportError:
    # No Cython/NumPy at build time: install pure-Python only.
    extensions = []

setup(ext_modules=extensions)
