"""Script for installation with pip."""
from setuptools import setup  # type: ignore

from version import SMDLAB_VERSION

setup(
    name="smdlab",
    description=(
        "Stochastic mirror descent under variational coherence: "
        "runs, certificates and mean dynamics"
    ),
    version=".".join(str(nbr) for nbr in SMDLAB_VERSION),
    python_requires=">= 3.9",
    packages=["smdlab", "smdlab.zoo"],
    install_requires=["numpy>=1.22", "scipy>=1.9", "PyYAML>=6.0", "joblib>=1.1"],
    entry_points={"console_scripts": ["smd = smdlab.cli:main"]},
)
