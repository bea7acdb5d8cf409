"""Builds the optional compiled integrator; the package works without it."""
import os

from setuptools import setup

ext_modules = []
if os.environ.get("SETSTAB_NO_EXT", "") == "":
    try:
        import numpy
        from Cython.Build import cythonize
        from setuptools import Extension

        ext_modules = cythonize(
            [Extension("setstab._kernel", ["src/setstab/_kernel.pyx"],
                       include_dirs=[numpy.get_include()],
                       extra_compile_args=["-O3"],
                       define_macros=[("NPY_NO_DEPRECATED_API", "NPY_1_7_API_VERSION")])],
            compiler_directives={"language_level": 3},
            quiet=True,
        )
    except ImportError:
        ext_modules = []

setup(ext_modules=ext_modules)
