"""Build the optional compiled kernels.

If Cython or a C compiler is unavailable, or the extension fails to build,
installation still succeeds and the package falls back to its NumPy kernels.
Set ``DIFFRF_NO_OPENMP=1`` to build without OpenMP.
"""

import os
import sys

from setuptools import setup
from setuptools.command.build_ext import build_ext


class OptionalBuildExt(build_ext):
    def run(self):
        try:
            super().run()
        except Exception as exc:  # noqa: BLE001 - any build failure means fallback
            self._skip(exc)

    def build_extension(self, ext):
        try:
            super().build_extension(ext)
        except Exception as exc:  # noqa: BLE001
            self._skip(exc)

    @staticmethod
    def _skip(exc):
        print(f"warning: compiled kernels not built ({exc}); using the NumPy fallback",
              file=sys.stderr)


def extensions():
    try:
        import numpy as np
        from Cython.Build import cythonize
    except ImportError:
        print("warning: Cython or NumPy missing at build time; skipping compiled kernels",
              file=sys.stderr)
        return []
    from setuptools import Extension

    omp = [] if os.environ.get("DIFFRF_NO_OPENMP") else ["-fopenmp"]
    ext = Extension(
        "diffrf._core",
        ["src/diffrf/_core.pyx"],
        include_dirs=[np.get_include()],
        define_macros=[("NPY_NO_DEPRECATED_API", "NPY_1_7_API_VERSION")],
        extra_compile_args=["-O3", "-ffp-contract=off"] + omp,
        extra_link_args=omp,
    )
    try:
        return cythonize([ext], compiler_directives={"language_level": "3"})
    except Exception as exc:  # noqa: BLE001
        print(f"warning: cythonize failed ({exc}); skipping compiled kernels", file=sys.stderr)
        return []


setup(ext_modules=extensions(), cmdclass={"build_ext": OptionalBuildExt})
