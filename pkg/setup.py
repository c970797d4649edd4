import os

from setuptools import setup

ext_modules = []
if os.environ.get("CHAINTORQUE_NO_EXT") != "1":
    try:
        from Cython.Build import cythonize

        ext_modules = cythonize(
            ["src/chaintorque/_speedups.pyx"],
            compiler_directives={"language_level": "3"},
        )
    except ImportError:
        # pure-Python fallback in chaintorque._wordops covers the kernels
        ext_modules = []

setup(ext_modules=ext_modules)
