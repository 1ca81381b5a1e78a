"""Builds the native module with the project's CMake setup.

The C++ core and the extension are configured by the top level
CMakeLists.txt; this just points CMake's library output at wherever
setuptools wants the extension and builds that one target.
"""

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
        out_dir = Path(self.get_ext_fullpath(ext.name)).resolve().parent
        out_dir.mkdir(parents=True, exist_ok=True)
        source_dir = Path(__file__).resolve().parent
        build_dir = Path(self.build_temp).resolve() / "cmake"

        configure = [
            "cmake",
            "-S", str(source_dir),
            "-B", str(build_dir),
            "-DDCGNN_BUILD_CLI=OFF",
            "-DDCGNN_BUILD_TESTS=OFF",
            "-DDCGNN_BUILD_PYTHON=ON",
            f"-DCMAKE_LIBRARY_OUTPUT_DIRECTORY={out_dir}",
            f"-DPython3_EXECUTABLE={sys.executable}",
        ]
        subprocess.run(configure, check=True)
        subprocess.run(
            ["cmake", "--build", str(build_dir), "--target", "_dcgnn", "-j"],
            check=True,
        )


setup(
    ext_modules=[CMakeExtension("dcgnn._dcgnn")],
    cmdclass={"build_ext": CMakeBuild},
)
