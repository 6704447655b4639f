"""CMake-driven build of the _poisonguard extension module."""

import os
import subprocess
import sys
from pathlib import Path

from setuptools import Extension, setup
from setuptools.command.build_ext import build_ext


class CMakeExtension(Extension):
    def __init__(self, name):
        super().__init__(name, sources=[])


class CMakeBuild(build_ext):
    def build_extension(self, ext):
        source_dir = Path(__file__).resolve().parent
        out_dir = Path(self.get_ext_fullpath(ext.name)).resolve().parent
        build_dir = Path(self.build_temp).resolve()
        build_dir.mkdir(parents=True, exist_ok=True)
        cmake_args = [
            f"-DCMAKE_LIBRARY_OUTPUT_DIRECTORY={out_dir}",
            f"-DPython3_EXECUTABLE={sys.executable}",
            "-DPOISONGUARD_BUILD_PYTHON=ON",
            "-DPOISONGUARD_BUILD_TESTS=OFF",
            "-DCMAKE_BUILD_TYPE=Release",
        ]
        subprocess.check_call(["cmake", str(source_dir), *cmake_args],
                              cwd=build_dir)
        subprocess.check_call(
            ["cmake", "--build", ".", "--target", "_poisonguard",
             f"-j{os.cpu_count() or 2}"],
            cwd=build_dir)


setup(
    ext_modules=[CMakeExtension("poisonguard._poisonguard")],
    cmdclass={"build_ext": CMakeBuild},
)
