"""Build script for the optional compiled kernel extension.

The package is fully functional without the extension: crimesim.kernels
falls back to a numpy implementation with identical semantics. The
extension only speeds up the per-step weighted sampling inner loop.
"""
from setuptools import Extension, setup

ext_modules = []
try:
    from Cython.Build import cythonize
    import numpy

    ext_modules = cythonize(
        [
            Extension(
                "crimesim.kernels._native",
                ["src/crimesim/kernels/_native.pyx"],
                include_dirs=[numpy.get_include()],
                extra_compile_args=["-O3"],
                define_macros=[("NPY_NO_DEPRECATED_API", "NPY_1_7_API_VERSION")],
                optional=True,
            )
        ],
        compiler_directives={"language_level": "3"},
    )
except ImportError:
    pass

setup(ext_modules=ext_modules)
