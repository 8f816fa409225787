"""Build script: compiles the optional fast kernels when Cython is available.

The package works without the extension (a numpy fallback is selected at
import time), so any failure here downgrades to a pure build instead of
aborting the install.  Build in place for development with:

    python3 setup.py build_ext --inplace
"""

from setuptools import setup

ext_modules = []
try:
    from Cython.Build import cythonize

    ext_modules = cythonize(
        ["src/wakesim/_kernels_c.pyx"],
        language_level=3,
        annotate=False,
    )
    for ext in ext_modules:
        ext.extra_compile_args = ["-O3"]
except ImportError:
    pass

setup(ext_modules=ext_modules)
