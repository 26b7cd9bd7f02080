"""Build the optional Cython kernels.

The package works without them: ``driftlens.kernels`` falls back to the
numpy implementations when ``driftlens._kernels`` cannot be imported.
Set ``DRIFTLENS_NO_EXT=1`` to skip the compile step entirely.
"""
import os

from setuptools import setup

ext_modules = []
if not os.environ.get("DRIFTLENS_NO_EXT"):
    try:
        import numpy as np
        from Cython.Build import cythonize
        from setuptools import Extension
    except ImportError:
        pass
    else:
        ext_modules = cythonize(
            [
                Extension(
                    "driftlens._kernels",
                    ["src/driftlens/_kernels.pyx"],
                    include_dirs=[np.get_include()],
                    extra_compile_args=["-O3"],
                    define_macros=[("NPY_NO_DEPRECATED_API", "NPY_1_7_API_VERSION")],
                )
            ],
            compiler_directives={"language_level": "3"},
        )

setup(ext_modules=ext_modules)
