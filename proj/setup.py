"""Builds the pybind11 extension through the project's CMake tree.

The CMake build owns every compiler detail (C++20, Eigen, the static core
archive); this shim just configures it with the test targets switched off,
builds the `_core` module, and drops the resulting shared object where
setuptools expects the extension for the current build (wheel or editable).
"""

import os
import shutil
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
        source_dir = Path(__file__).parent.resolve()
        build_dir = Path(self.build_temp).resolve() / "cmake"
        build_dir.mkdir(parents=True, exist_ok=True)

        subprocess.run(
            [
                "cmake",
                str(source_dir),
                f"-DCMAKE_BUILD_TYPE=Release",
                f"-DPython_EXECUTABLE={sys.executable}",
                "-DFLOWMAP_PYTHON=ON",
                "-DFLOWMAP_TESTS=OFF",
            ],
            cwd=build_dir,
            check=True,
        )
        subprocess.run(
            [
                "cmake",
                "--build",
                ".",
                "--target",
                "_core",
                f"-j{os.cpu_count() or 1}",
            ],
            cwd=build_dir,
            check=True,
        )

        staged = sorted((build_dir / "python" / "flowmap").glob("_core.*"))
        if not staged:
            raise RuntimeError("CMake did not produce the _core module")
        target = Path(self.get_ext_fullpath(ext.name)).resolve()
        target.parent.mkdir(parents=True, exist_ok=True)
        shutil.copy2(staged[-1], target)


setup(
    ext_modules=[CMakeExtension("flowmap._core")],
    cmdclass={"build_ext": CMakeBuild},
)
