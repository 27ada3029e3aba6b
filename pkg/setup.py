import os

import numpy
from setuptools import Extension, setup

compile_args = ["-O3", "-funroll-loops"]
if os.environ.get("GNNFEC_NATIVE"):
    compile_args.append("-march=native")

try:
    from Cython.Build import cythonize

    extensions = cythonize(
        [
            Extension(
                "gnnfec.kernels._ckernels",
                ["src/gnnfec/kernels/_ckernels.pyx"],
                include_dirs=[numpy.get_include()],
                extra_compile_args=compile_args,
            )
        ],
        language_level=3,
    )
except ImportError:
    # No Cython at build time: the package still works on the pure-numpy
    # kernel backend, selected automatically at import.
    extensions = []

setup(ext_modules=extensions)
