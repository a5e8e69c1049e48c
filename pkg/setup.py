"""Build script: compiles the optional Lucas-Kanade kernel extension.

The package works without the extension (a numpy fallback is selected at
import time), so any build failure here downgrades to a pure-Python install
instead of aborting.
"""

from setuptools import Extension, setup
from setuptools.command.build_ext import build_ext


class optional_build_ext(build_ext):
    def run(self):
        try:
            super().run()
        except Exception as exc:  # missing compiler, etc.
            print(f"warning: skipping compiled kernels ({exc}); "
                  "falling back to pure Python")

    def build_extension(self, ext):
        try:
            super().build_extension(ext)
        except Exception as exc:
            print(f"warning: could not build {ext.name} ({exc}); "
                  "falling back to pure Python")


def extensions():
    try:
        from Cython.Build import cythonize
    except ImportError:
        print("warning: Cython not available, building without compiled kernels")
        return []
    exts = [
        Extension(
            "dualtrack._kernels._lk_cy",
            ["src/dualtrack/_kernels/_lk_cy.pyx"],
            extra_compile_args=["-O3"],
        )
    ]
    return cythonize(exts, compiler_directives={"language_level": "3"})


setup(
    ext_modules=extensions(),
    cmdclass={"build_ext": optional_build_ext},
)
