import numpy as np
from setuptools import Extension, setup

try:
    from Cython.Build import cythonize
except ImportError:
    cythonize = None

extensions = [
    Extension(
        "fscond.backends._ckernels",
        ["src/fscond/backends/_ckernels.pyx"],
        include_dirs=[np.get_include()],
        # -fcx-limited-range: inline 4-multiply complex arithmetic (matches
        # numpy's formula) instead of the libgcc __muldc3 call.
        extra_compile_args=["-O3", "-fcx-limited-range"],
        define_macros=[("NPY_NO_DEPRECATED_API", "NPY_1_7_API_VERSION")],
    )
]

if cythonize is not None:
    setup(ext_modules=cythonize(extensions, compiler_directives={"language_level": "3"}))
else:
    # No Cython available: install pure Python; the reference backend is
    # selected automatically at import time.
    setup()
