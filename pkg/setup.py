"""Builds the optional Cython kernel extension.

The package works without it (pure-numpy fallbacks are selected at import),
so the extension is marked optional: a failed compile degrades to the
fallback instead of failing the install.
"""

from setuptools import Extension, setup

ext_modules = []
try:
    import numpy
    from Cython.Build import cythonize

    ext = Extension(
        "drapesync._kernels",
        sources=["src/drapesync/_kernels.pyx"],
        include_dirs=[numpy.get_include()],
        define_macros=[("NPY_NO_DEPRECATED_API", "NPY_1_7_API_VERSION")],
        extra_compile_args=["-O3"],
    )
    ext.optional = True
    ext_modules = cythonize([ext], language_level="3")
except ImportError:
    pass

setup(ext_modules=ext_modules)
