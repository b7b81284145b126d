"""Builds the compiled kernel extension. The package still works without it
(a NumPy fallback is selected at import), but the compiled core is what makes
dense ray bundles fast enough for closed-loop use."""

import numpy as np
from Cython.Build import cythonize
from setuptools import Extension, setup

ext = Extension(
    "rmpnav._kernels._ckern",
    ["src/rmpnav/_kernels/_ckern.pyx"],
    include_dirs=[np.get_include()],
    extra_compile_args=["-O3"],
    define_macros=[("NPY_NO_DEPRECATED_API", "NPY_1_7_API_VERSION")],
)

setup(
    ext_modules=cythonize([ext], compiler_directives={"language_level": "3"}),
)
