import os

from setuptools import setup

ext_modules = []
if os.environ.get("FSBOOST_NO_EXT") != "1":
    try:
        from Cython.Build import cythonize
    except ImportError:
        cythonize = None
    if cythonize is not None:
        from setuptools import Extension

        ext_modules = cythonize(
            [
                Extension(
                    "fsboost._ckernels",
                    ["src/fsboost/_ckernels.pyx"],
                    extra_compile_args=["-O3"],
                )
            ],
            compiler_directives={"language_level": "3"},
        )

setup(ext_modules=ext_modules)
