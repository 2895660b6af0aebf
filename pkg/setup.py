"""Build script for the compiled kernel backend.

The package works without the extension (the numpy backend is selected at
import time when the compiled module is absent), so a failed cythonize or a
missing compiler downgrades to a warning instead of aborting the install.
"""

import sys

from setuptools import setup


def compiled_backend():
    try:
        import numpy
        from Cython.Build import cythonize
        from setuptools import Extension
    except ImportError as exc:
        print(f"warning: skipping compiled backend ({exc})", file=sys.stderr)
        return []
    ext = Extension(
        "moesemcom.backends._ops_cy",
        ["src/moesemcom/backends/_ops_cy.pyx"],
        include_dirs=[numpy.get_include()],
        define_macros=[("NPY_NO_DEPRECATED_API", "NPY_1_7_API_VERSION")],
        extra_compile_args=["-O3"],
    )
    return cythonize([ext], language_level="3")


setup(ext_modules=compiled_backend())
