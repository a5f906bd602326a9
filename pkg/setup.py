"""Build script for the optional compiled kernel core.

The extension accelerates the convolution forward/redistribution loops.
If it cannot be built (no compiler, no Cython), the install still succeeds
and the package falls back to the NumPy kernels at import time.
"""

import os

from setuptools import Extension, setup
from setuptools.command.build_ext import build_ext


class optional_build_ext(build_ext):
    """Build the extension if possible, otherwise warn and continue."""

    def run(self):
        try:
            super().run()
        except Exception as exc:  # compiler missing, etc.
            print(f"WARNING: compiled kernels skipped ({exc}); "
                  "falling back to NumPy kernels")

    def build_extension(self, ext):
        try:
            super().build_extension(ext)
        except Exception as exc:
            print(f"WARNING: building {ext.name} failed ({exc}); "
                  "falling back to NumPy kernels")


def extensions():
    if os.environ.get("RELPROP_NO_EXT"):
        return []
    import numpy as np
    from Cython.Build import cythonize

    ext = Extension(
        "relprop.kernels._convext",
        ["src/relprop/kernels/_convext.pyx"],
        include_dirs=[np.get_include()],
        extra_compile_args=["-O3"],
        define_macros=[("NPY_NO_DEPRECATED_API", "NPY_1_7_API_VERSION")],
    )
    return cythonize([ext], compiler_directives={"language_level": "3"})


setup(
    ext_modules=extensions(),
    cmdclass={"build_ext": optional_build_ext},
)
