"""Build hook for the optional compiled kernels.

The package works without the extension; the import shim in
``binary_cvqkd.kernels`` falls back to the numpy implementation.
"""
import os

from setuptools import Extension, setup

ext_modules = []
if os.environ.get("BINARY_CVQKD_NO_EXT") != "1":
    try:
        from Cython.Build import cythonize
    except ImportError:
        cythonize = None
    if cythonize is not None:
        ext_modules = cythonize(
            [
                Extension(
                    "binary_cvqkd._kernels",
                    ["src/binary_cvqkd/_kernels.pyx"],
                    extra_compile_args=["-O3"],
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
