import sys

from setuptools import setup

try:
    import numpy as np
    from Cython.Build import cythonize
    from setuptools import Extension
except ImportError:  # no toolchain: the numpy fallback is used at import
    ext_modules = []
else:
    ext_modules = cythonize(
        [
            Extension(
                "dcbandit._ckernels",
                ["src/dcbandit/_ckernels.pyx"],
                include_dirs=[np.get_include()],
                define_macros=[("NPY_NO_DEPRECATED_API", "NPY_1_7_API_VERSION")],
                # fast-math lets gcc call the vectorised libm; it is a compile flag
                # only, so crtfastmath (global FTZ) is never linked in
                extra_compile_args=["-O3", "-ffast-math"],
                libraries=["mvec", "m"] if sys.platform.startswith("linux") else [],
                optional=True,
            )
        ],
        compiler_directives={"language_level": "3"},
    )

setup(ext_modules=ext_modules)
