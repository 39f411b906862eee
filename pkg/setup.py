"""Build the optional compiled sweep kernel.

Without Cython (or a C compiler) the package installs with its pure-Python
kernel only.
"""

import os

from setuptools import setup

ext_modules = []
if os.environ.get("GGE_SPECTRA_NO_EXT") != "1":
    try:
        from Cython.Build import cythonize
        from setuptools import Extension

        ext_modules = cythonize(
            [Extension("gge_spectra._kernels", ["src/gge_spectra/_kernels.pyx"], extra_compile_args=["-O3"])],
            language_level=3,
        )
    except ImportError:
        ext_modules = []

setup(ext_modules=ext_modules)
