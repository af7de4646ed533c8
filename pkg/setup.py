from os import path

from setuptools import find_packages, setup

this_directory = path.abspath(path.dirname(__file__))
with open(path.join(this_directory, "./README.md"), encoding="utf-8") as f:
    long_description = f.read()

with open(path.join(this_directory, "requirements.txt"), encoding="utf-8") as f:
    install_requires = [line.strip() for line in f if line.strip() and not line.startswith("#")]

setup(
    name="gestaltbind",
    packages=[package for package in find_packages() if package.startswith("gestaltbind")],
    install_requires=install_requires,
    extras_require={"test": ["pytest"]},
    package_data={"gestaltbind.gestaltbind": ["presets/*.json"]},
    include_package_data=True,
    entry_points={"console_scripts": ["gestaltbind=gestaltbind.experiments.cli:main"]},
    python_requires=">=3.8",
    description="Gestalt models of biological motion with retrospective inference of feature binding and perspective",
    version="0.1.0",
    long_description=long_description,
    long_description_content_type="text/markdown",
)
