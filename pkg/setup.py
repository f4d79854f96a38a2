"""Build script: compiles the Cython belief kernels when Cython is available.

The package works without the extension (a numpy fallback is selected at
import time), so the build degrades gracefully instead of failing.
"""

from setuptools import Extension, setup

try:
    from Cython.Build import cythonize
    import numpy as np

    ext_modules = cythonize(
        [
            Extension(
                "assayplan._kernels_cy",
                ["src/assayplan/_kernels_cy.pyx"],
                include_dirs=[np.get_include()],
                define_macros=[("NPY_NO_DEPRECATED_API", "NPY_1_7_API_VERSION")],
            )
        ],
        compiler_directives={"language_level": "3"},
    )
except ImportError:
    ext_modules = []

setup(ext_modules=ext_modules)
