import sys

from setuptools import setup

ext_modules = []
try:
    import numpy
    from Cython.Build import cythonize
    from setuptools.extension import Extension

    ext_modules = cythonize(
        [
            Extension(
                "msde._kernels",
                ["src/msde/_kernels.pyx"],
                include_dirs=[numpy.get_include()],
                define_macros=[("NPY_NO_DEPRECATED_API", "NPY_1_7_API_VERSION")],
                extra_compile_args=["-O3"],
            )
        ],
        language_level="3",
    )
except Exception as exc:
    # No Cython / no compiler: the package falls back to the pure-Python
    # kernels at import time, so this is a soft failure.
    sys.stderr.write("msde: building without compiled kernels (%s)\n" % exc)

setup(ext_modules=ext_modules)
