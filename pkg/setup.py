"""Builds the compiled episode kernel.

The extension is optional: if compilation fails the package still installs
and the engine falls back to the pure-Python kernel at import time.
`-ffp-contract=off` keeps the compiled arithmetic bit-identical to the
pure-Python kernel (no FMA contraction), which the parity tests assert.
"""

from setuptools import Extension, setup

try:
    from Cython.Build import cythonize

    extensions = cythonize(
        [
            Extension(
                "efkesim._kernel",
                ["src/efkesim/_kernel.pyx"],
                extra_compile_args=["-O2", "-ffp-contract=off"],
            )
        ],
        language_level=3,
    )
except ImportError:
    extensions = []

setup(ext_modules=extensions)
