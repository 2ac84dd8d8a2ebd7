"""Build script for the optional compiled event-loop core.

The package is fully functional without the extension: `citymule.engine`
falls back to the pure-Python core when `citymule._core` is missing.
Any compiler or Cython failure therefore downgrades to a warning.
"""

import sys

from setuptools import Extension, setup

try:
    import numpy
    from Cython.Build import cythonize
except ImportError:  # pure-Python install
    numpy = None
    cythonize = None

ext_modules = []
if cythonize is not None:
    try:
        ext_modules = cythonize(
            [
                Extension(
                    "citymule._core",
                    ["src/citymule/_core.pyx"],
                    include_dirs=[numpy.get_include()],
                    define_macros=[("NPY_NO_DEPRECATED_API", "NPY_1_7_API_VERSION")],
                )
            ],
            compiler_directives={"language_level": "3"},
        )
    except Exception as exc:  # noqa: BLE001
        print(f"citymule: skipping compiled core ({exc})", file=sys.stderr)
        ext_modules = []

setup(ext_modules=ext_modules)
