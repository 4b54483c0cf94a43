"""Build script: compiles the optional fast-kernel extension.

The package works without the extension (a pure-Python twin of every
kernel ships alongside it), so a missing compiler or Cython only costs
speed, never functionality.
"""

from setuptools import Extension, setup

try:
    from Cython.Build import cythonize
except ImportError:
    cythonize = None

ext_modules = []
if cythonize is not None:
    ext_modules = cythonize(
        [
            Extension(
                "clonestat._kernels_cy",
                ["src/clonestat/_kernels_cy.pyx"],
                # -ffp-contract=off keeps the compiled kernels bitwise
                # identical to the pure-Python twin (no FMA contraction).
                extra_compile_args=["-O3", "-ffp-contract=off"],
            )
        ],
        compiler_directives={"language_level": "3"},
    )

setup(ext_modules=ext_modules)
