"""Build the optional Cython kernels; the package still installs without them."""

from setuptools import setup

ext_modules = []
try:
    from Cython.Build import cythonize
    from setuptools import Extension

    ext_modules = cythonize(
        [Extension("pch._kernels", ["src/pch/_kernels.pyx"], extra_compile_args=["-O2"])],
        compiler_directives={"language_level": 3},
        quiet=True,
    )
except ImportError:
    pass

setup(ext_modules=ext_modules)
