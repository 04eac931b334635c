"""Build the optional compiled kernel; the package falls back to pure Python without it."""

import os

from setuptools import setup

ext_modules = []
if os.environ.get("TESTSCHED_NO_EXT") != "1":
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
                    "testsched._ckernel",
                    ["src/testsched/_ckernel.pyx"],
                    include_dirs=[np.get_include()],
                    define_macros=[("NPY_NO_DEPRECATED_API", "NPY_1_7_API_VERSION")],
                    extra_compile_args=["-O3", "-fopenmp"],
                    extra_link_args=["-fopenmp"],
                )
            ],
            compiler_directives={"language_level": "3"},
        )

setup(ext_modules=ext_modules)
