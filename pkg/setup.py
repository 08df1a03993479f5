"""Build script for the optional compiled kernels.

The package works without the extension; the pure numpy backend is used
as a fallback when the compiled module is missing.  Set PREFMDP_NO_EXT=1
to skip compilation entirely.
"""

import os

from setuptools import setup

extensions = []
if not os.environ.get("PREFMDP_NO_EXT"):
    try:
        import numpy
        from Cython.Build import cythonize
        from setuptools.extension import Extension

        extensions = cythonize(
            [
                Extension(
                    "prefmdp._kernels._speedups",
                    sources=["src/prefmdp/_kernels/_speedups.pyx"],
                    include_dirs=[numpy.get_include()],
                    extra_compile_args=["-O3", "-ffp-contract=off"],
                    define_macros=[("NPY_NO_DEPRECATED_API", "NPY_1_7_API_VERSION")],
                )
            ],
            compiler_directives={
                "language_level": 3,
                "boundscheck": False,
                "wraparound": False,
                "cdivision": True,
                "initializedcheck": False,
            },
        )
    except ImportError:
        extensions = []

setup(ext_modules=extensions)
