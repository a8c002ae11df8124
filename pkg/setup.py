"""
Installs the designc package and the `designc` command
 to install, enter the code:
pip install .
"""

from setuptools import setup

setup(
    name="designc",
    version="0.1.0",
    packages=["designc"],
    package_data={"designc": ["languages/*/*.json",
                              "languages/*/rules/*.json",
                              "languages/*/chains/*.json",
                              "languages/*/chains/*.py"]},
    python_requires=">=3.7",
    install_requires=["numpy", "pandas", "networkx", "sympy", "seaborn", "matplotlib", "tqdm"],
    extras_require={"test": ["pytest"]},
    entry_points={"console_scripts": ["designc=designc.cli:main"]},
)
