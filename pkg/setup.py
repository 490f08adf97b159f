import os

import numpy as np
from setuptools import Extension, setup

ext_modules = []
if os.environ.get("STOCHSTAB_NO_EXT", "") != "1":
    try:
        from Cython.Build import cythonize
    except ImportError:  # pure-Python install
        cythonize = None
    if cythonize is not None:
        ext_modules = cythonize(
            [
                Extension(
                    "stochstab._kernels",
                    ["src/stochstab/_kernels.pyx"],
                    include_dirs=[np.get_include()],
                    # keep IEEE semantics identical to the numpy fallback
                    extra_compile_args=["-O3", "-ffp-contract=off", "-fno-fast-math"],
                )
            ],
            compiler_directives={"language_level": "3"},
        )

setup(ext_modules=ext_modules)
