"""Build script for the optional compiled sign-enumeration kernel.

The package works without it; ``anisopsido._kernels`` falls back to a
numpy implementation when the extension is missing.
"""
import os

from setuptools import setup

ext_modules = []
if not os.environ.get("ANISOPSIDO_NO_EXT"):
    try:
        from Cython.Build import cythonize
        from setuptools import Extension

        ext_modules = cythonize(
            [
                Extension(
                    "anisopsido._rademacher_ext",
                    sources=["src/anisopsido/_rademacher_ext.pyx"],
                    extra_compile_args=["-O3"],
                )
            ],
            language_level=3,
        )
    except ImportError:
        ext_modules = []

setup(ext_modules=ext_modules)
