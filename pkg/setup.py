import os

import numpy as np
from setuptools import Extension, setup

# compiled kernels are optional; the package falls back to numpy
ext_modules = []
if os.environ.get("HETPROOF_NO_EXT") != "1":
    try:
        from Cython.Build import cythonize
    except ImportError:
        cythonize = None
    if cythonize is not None:
        ext = Extension(
            "hetproof._ckernels",
            ["src/hetproof/_ckernels.pyx"],
            include_dirs=[np.get_include(), "src/hetproof"],
            # directed rounding relies on exact IEEE ops: no contraction, no fast-math
            extra_compile_args=["-O2", "-ffp-contract=off", "-fno-fast-math", "-frounding-math"],
            define_macros=[("NPY_NO_DEPRECATED_API", "NPY_1_7_API_VERSION")],
        )
        ext_modules = cythonize([ext], language_level=3)

setup(ext_modules=ext_modules)
