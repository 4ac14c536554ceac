"""Builds the Rust extension with cargo and ships it inside the package."""

import pathlib
import shutil
import subprocess
import sysconfig

from setuptools import Extension, setup
from setuptools.command.build_ext import build_ext

ROOT = pathlib.Path(__file__).resolve().parent


class CargoBuildExt(build_ext):
    def build_extension(self, ext):
        subprocess.check_call(
            ["cargo", "build", "--release", "-p", "bte-py"], cwd=ROOT
        )
        built = ROOT / "target" / "release" / "libbte_py.so"
        dest = pathlib.Path(self.get_ext_fullpath(ext.name))
        dest.parent.mkdir(parents=True, exist_ok=True)
        shutil.copy2(built, dest)


setup(
    ext_modules=[Extension("bte._native", sources=[])],
    cmdclass={"build_ext": CargoBuildExt},
    options={"bdist_wheel": {"py_limited_api": "cp310"}}
    if sysconfig.get_config_var("Py_GIL_DISABLED") != 1
    else {},
)
