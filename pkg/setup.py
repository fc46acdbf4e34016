import numpy as np
from Cython.Build import cythonize
from setuptools import Extension, setup

ext = Extension(
    "nctorus._kernels",
    ["src/nctorus/_kernels.pyx"],
    include_dirs=[np.get_include()],
    # _GNU_SOURCE exposes sincos; limited range keeps complex multiplies inline
    define_macros=[("NPY_NO_DEPRECATED_API", "NPY_1_7_API_VERSION"), ("_GNU_SOURCE", None)],
    extra_compile_args=["-O3", "-fcx-limited-range"],
)

setup(ext_modules=cythonize([ext], compiler_directives={"language_level": "3"}))
