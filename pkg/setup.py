import numpy as np
from Cython.Build import cythonize
from setuptools import Extension, setup

extensions = [
    Extension(
        "microgrid_q._ckernels",
        ["src/microgrid_q/_ckernels.pyx"],
        include_dirs=[np.get_include()],
        # no FMA contraction: results must match the pure-Python backend bit for bit
        extra_compile_args=["-O3", "-ffp-contract=off", "-fno-fast-math"],
        define_macros=[("NPY_NO_DEPRECATED_API", "NPY_1_7_API_VERSION")],
    )
]

setup(ext_modules=cythonize(extensions, compiler_directives={"language_level": "3"}))
