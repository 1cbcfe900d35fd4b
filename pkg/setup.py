"""Build script: compiles the pairwise-interaction inner loop if a C
toolchain is available.  The package works without it (pure-numpy
fallback selected at import time), so the extension is marked optional.
"""
import numpy
from setuptools import Extension, setup

try:
    from Cython.Build import cythonize
    HAVE_CYTHON = True
except ImportError:
    HAVE_CYTHON = False

ext_modules = []
if HAVE_CYTHON:
    ext = Extension(
        "mollsim._pairloop",
        sources=["src/mollsim/_pairloop.pyx"],
        include_dirs=[numpy.get_include()],
        extra_compile_args=["-O3"],
        define_macros=[("NPY_NO_DEPRECATED_API", "NPY_1_7_API_VERSION")],
        optional=True,
    )
    ext_modules = cythonize([ext], language_level=3)

setup(ext_modules=ext_modules)
