"""Build script: compiles the optional raster kernel extension.

The extension is a speedup, not a requirement.  If Cython or a C compiler
is unavailable the build proceeds and the package falls back to the numpy
kernels at import time (see ddp.raster.backend).  Set DDP_PURE_PYTHON=1 to
skip the extension build entirely.

-ffp-contract=off keeps the compiled Gaussian kernels bit-identical to the
numpy fallback: FMA contraction would change float64 rounding.
"""

import os

from setuptools import setup
from setuptools.command.build_ext import build_ext


class optional_build_ext(build_ext):
    def run(self):
        try:
            super().run()
        except Exception as exc:  # toolchain missing: fall back to numpy kernels
            print(f"warning: skipping compiled kernels ({exc})")

    def build_extension(self, ext):
        try:
            super().build_extension(ext)
        except Exception as exc:
            print(f"warning: skipping {ext.name} ({exc})")


ext_modules = []
if os.environ.get("DDP_PURE_PYTHON") != "1":
    try:
        import numpy
        from Cython.Build import cythonize
        from setuptools import Extension

        ext_modules = cythonize(
            [
                Extension(
                    "ddp.raster._kernels",
                    ["src/ddp/raster/_kernels.pyx"],
                    include_dirs=[numpy.get_include()],
                    define_macros=[("NPY_NO_DEPRECATED_API", "NPY_1_7_API_VERSION")],
                    extra_compile_args=["-O2", "-ffp-contract=off"],
                )
            ],
            language_level=3,
        )
    except ImportError:
        print("warning: Cython/numpy not available, building without compiled kernels")

setup(ext_modules=ext_modules, cmdclass={"build_ext": optional_build_ext})
