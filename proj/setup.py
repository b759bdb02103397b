import glob

from pybind11.setup_helpers import Pybind11Extension, build_ext
from setuptools import setup

sources = sorted(glob.glob("src/*.cpp")) + ["src/python/bindings.cpp"]

setup(
    ext_modules=[
        Pybind11Extension(
            "bevbench._core",
            sources,
            include_dirs=["include", "vendor"],
            cxx_std=20,
            extra_compile_args=["-O3"],
        )
    ],
    cmdclass={"build_ext": build_ext},
)
