import os

from setuptools import Extension, setup
from Cython.Build import cythonize

extra_compile = ["-O3"]
extra_link = []
if os.environ.get("WNFKIT_NO_OPENMP", "0") != "1":
    extra_compile.append("-fopenmp")
    extra_link.append("-fopenmp")

extensions = [
    Extension(
        "wnfkit._core",
        ["src/wnfkit/_core.pyx"],
        extra_compile_args=extra_compile,
        extra_link_args=extra_link,
    )
]

setup(ext_modules=cythonize(extensions, language_level=3))
