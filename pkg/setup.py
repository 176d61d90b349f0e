"""Build script: compiles the optional native proximity kernel.

The package is fully functional without the extension (a pure numpy
backend is selected at import time), so any build failure here downgrades
to a warning instead of aborting the install.
"""

import sys

from setuptools import setup

ext_modules = []
try:
    import numpy as np
    from Cython.Build import cythonize
    from setuptools import Extension

    ext_modules = cythonize(
        [
            Extension(
                "graspq._kernels.native",
                ["src/graspq/_kernels/native.pyx"],
                include_dirs=[np.get_include()],
                define_macros=[("NPY_NO_DEPRECATED_API", "NPY_1_7_API_VERSION")],
            )
        ],
        language_level=3,
    )
except Exception as exc:  # pragma: no cover - depends on build host
    sys.stderr.write(
        "graspq: native kernel build skipped (%s); using pure-python backend\n" % exc
    )
    ext_modules = []

setup(ext_modules=ext_modules)
