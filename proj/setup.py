"""pip front end: drives the CMake build for the native extension.

The heavy lifting lives in CMakeLists.txt; this only configures, builds the
python target, and drops the resulting _core module into the package.
"""

import glob
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
    def run(self):
        source_dir = Path(__file__).parent.resolve()
        build_dir = Path(self.build_temp).resolve()
        build_dir.mkdir(parents=True, exist_ok=True)

        subprocess.run(
            [
                "cmake",
                "-S", str(source_dir),
                "-B", str(build_dir),
                "-DCMAKE_BUILD_TYPE=Release",
                "-DPVSIM_BUILD_TESTS=OFF",
                f"-DPython3_EXECUTABLE={sys.executable}",
            ],
            check=True,
        )
        subprocess.run(
            ["cmake", "--build", str(build_dir), "--target", "pvsim_py", "--parallel"],
            check=True,
        )

        package_dir = Path(self.get_ext_fullpath("pvsim._core")).parent.resolve()
        package_dir.mkdir(parents=True, exist_ok=True)
        built = glob.glob(str(build_dir / "python" / "pvsim" / "_core*"))
        if not built:
            raise RuntimeError("cmake build produced no _core extension")
        for path in built:
            shutil.copy2(path, package_dir)


setup(
    packages=["pvsim"],
    package_dir={"pvsim": "python/pvsim"},
    ext_modules=[CMakeExtension("pvsim._core")],
    cmdclass={"build_ext": CMakeBuild},
)
