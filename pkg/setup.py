"""Build script for the optional compiled kernels.

The package works without the extension (a pure-Python fallback is selected
at import time); building it is strongly recommended for month-scale runs.
"""

from setuptools import Extension, setup

try:
    from Cython.Build import cythonize

    extensions = cythonize(
        [Extension("dhtwin.kernels._fast", ["src/dhtwin/kernels/_fast.pyx"])],
        language_level="3",
    )
except ImportError:
    extensions = []

setup(ext_modules=extensions)
