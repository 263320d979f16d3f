from setuptools import Extension, setup

import numpy as np

try:
    from Cython.Build import cythonize

    ext_modules = cythonize(
        [
            Extension(
                "yamobs._kernels._compiled",
                ["src/yamobs/_kernels/_compiled.pyx"],
                include_dirs=[np.get_include()],
            )
        ],
        language_level=3,
    )
except ImportError:
    # No Cython: the package still works through the pure-Python kernels.
    ext_modules = []

setup(ext_modules=ext_modules)
