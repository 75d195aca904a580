from setuptools import Extension, setup

try:
    from Cython.Build import cythonize

    ext_modules = cythonize(
        [
            Extension(
                "statage._kernels._core",
                ["src/statage/_kernels/_core.pyx"],
                extra_compile_args=["-O3"],
            )
        ],
        compiler_directives={
            "language_level": "3",
            "boundscheck": False,
            "wraparound": False,
            "cdivision": True,
            "initializedcheck": False,
        },
    )
except ImportError:
    # No Cython available: install pure-Python only, kernel backend falls
    # back to statage._kernels._fallback at import time.
    ext_modules = []

setup(ext_modules=ext_modules)
