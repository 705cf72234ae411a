"""Build script for the compiled Monte Carlo kernel.

The extension is optional: if Cython or a C compiler is unavailable the
package installs pure-Python and `jumpsmile.montecarlo` falls back to the
numpy kernel at import time.
"""

from setuptools import Extension, setup

ext_modules = []
try:
    import os

    import numpy
    import numpy.random
    from Cython.Build import cythonize

    rng_lib_dir = os.path.join(os.path.dirname(numpy.random.__file__), "lib")
    ext_modules = cythonize(
        [
            Extension(
                "jumpsmile._euler",
                ["src/jumpsmile/_euler.pyx"],
                include_dirs=[numpy.get_include()],
                library_dirs=[rng_lib_dir],
                libraries=["npyrandom"],
                define_macros=[("NPY_NO_DEPRECATED_API", "NPY_1_7_API_VERSION")],
                extra_compile_args=["-O3"],
            )
        ],
        compiler_directives={
            "language_level": "3",
            "boundscheck": False,
            "wraparound": False,
            "cdivision": True,
        },
    )
except ImportError:
    pass

setup(ext_modules=ext_modules)
