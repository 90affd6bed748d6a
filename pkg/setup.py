"""Build script for the optional compiled kernels.

The Cython extension ``edsym._ckernels`` accelerates expression-program
evaluation and sampled row reduction.  When Cython or a C compiler is not
available the package still installs and falls back to the numpy kernels.
"""
import os

from setuptools import setup

ext_modules = []
if os.environ.get("EDSYM_NO_EXT") != "1":
    try:
        import numpy
        from Cython.Build import cythonize
        from setuptools import Extension

        ext_modules = cythonize(
            [
                Extension(
                    "edsym._ckernels",
                    ["src/edsym/_ckernels.pyx"],
                    include_dirs=[numpy.get_include()],
                    define_macros=[("NPY_NO_DEPRECATED_API", "NPY_1_7_API_VERSION")],
                    extra_compile_args=["-O3"],
                )
            ],
            compiler_directives={
                "language_level": 3,
                "boundscheck": False,
                "wraparound": False,
                "cdivision": True,
            },
        )
    except Exception as exc:  # pragma: no cover - build environment dependent
        print(f"edsym: building without compiled kernels ({exc})")
        ext_modules = []

setup(ext_modules=ext_modules)
