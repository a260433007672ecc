"""Build the compiled kernel extension.

The package works without it (pure-numpy fallback kernels are selected at
import time), so failing to build here should be treated as a soft error by
downstream packagers; in development just rebuild with `pip install -e .
--no-build-isolation`.
"""

import platform

import numpy as np
from Cython.Build import cythonize
from setuptools import Extension, setup

extra_compile_args = ["-O3"]
if platform.machine() in ("x86_64", "AMD64"):
    # Runtime code paths guard on __AVX2__/__F16C__; plain C fallbacks keep
    # the extension buildable when these flags are removed.
    extra_compile_args += ["-mavx2", "-mfma", "-mf16c"]

ext = Extension(
    "unetaec.kernels._core",
    sources=[
        "src/unetaec/kernels/_core.pyx",
        "src/unetaec/kernels/convkernels.c",
    ],
    include_dirs=[np.get_include(), "src/unetaec/kernels"],
    extra_compile_args=extra_compile_args,
    define_macros=[("NPY_NO_DEPRECATED_API", "NPY_1_7_API_VERSION")],
)

setup(ext_modules=cythonize([ext], language_level="3"))
