"""Build script: compiles the optional Cython convolution kernels.

If Cython or a C compiler is unavailable the build falls back to a
pure-python wheel; the package selects the numpy kernels at import time.
"""

import sys

from setuptools import setup

ext_modules = []
try:
    import numpy
    from Cython.Build import cythonize
    from setuptools import Extension

    ext_modules = cythonize(
        [
            Extension(
                "sensal.kernels._native",
                ["src/sensal/kernels/_native.pyx"],
                include_dirs=[numpy.get_include()],
                define_macros=[("NPY_NO_DEPRECATED_API", "NPY_1_7_API_VERSION")],
            )
        ],
        language_level=3,
    )
except ImportError as exc:
    print(f"sensal: building without compiled kernels ({exc})", file=sys.stderr)

setup(ext_modules=ext_modules)
