"""Build script for the optional compiled kernels.

The Cython extension is marked optional: if Cython or a C compiler is
missing the package still installs and ``dsst.kernels`` falls back to the
numpy implementation.
"""
from setuptools import Extension, setup

try:
    from Cython.Build import cythonize
except ImportError:  # pragma: no cover - build without Cython
    ext_modules = []
else:
    ext_modules = cythonize(
        [
            Extension(
                "dsst._kernels",
                ["src/dsst/_kernels.pyx"],
                extra_compile_args=["-O3"],
                optional=True,
            )
        ],
        compiler_directives={
            "language_level": "3",
            "boundscheck": False,
            "wraparound": False,
            "cdivision": True,
        },
    )

setup(ext_modules=ext_modules)
