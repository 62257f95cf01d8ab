"""Build script.

The compiled stepping kernels are optional: if Cython or a C compiler is
missing, the build falls back to the pure numpy implementation and the
package stays fully functional (just slower).  Set PWSDE_NO_EXT=1 to skip
the extension on purpose.
"""

import os

from setuptools import setup

ext_modules = []
if not os.environ.get("PWSDE_NO_EXT"):
    try:
        import numpy
        from Cython.Build import cythonize
        from setuptools.extension import Extension

        ext = Extension(
            "pwsde.kernels._ckern",
            ["src/pwsde/kernels/_ckern.pyx"],
            include_dirs=[numpy.get_include()],
            define_macros=[("NPY_NO_DEPRECATED_API", "NPY_1_7_API_VERSION")],
            extra_compile_args=["-O3"],
        )
        ext_modules = cythonize([ext], language_level=3)
    except ImportError:
        ext_modules = []

setup(ext_modules=ext_modules)
