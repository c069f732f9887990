"""
Setup script for EDF Fair
This script creates a simple installation for the Explicitly Deweighted Features toolkit.
"""

from setuptools import setup, find_packages

packages = find_packages(exclude=["tests", "tests.*", "examples", "examples.*"])

setup(
    name="edf_fair",
    version="1.0.0",
    description="Fairness-utility tradeoffs by explicitly deweighting proxy features",
    packages=packages,
    install_requires=[
        # Core dependencies
        "tomli>=2.0.0",
        "numpy>=1.22",
        "scipy>=1.9",
        "pandas>=1.5.0",
    ],
    extras_require={
        "dev": [
            "pytest>=7.0.0",
            "hypothesis>=6.0",
        ],
    },
    python_requires='>=3.8',
    entry_points={
        'console_scripts': [
            # Include both underscore and hyphen versions to be safe
            'edf_fair=edf_fair:main',
            'edf-fair=edf_fair:main',
        ],
    },
    # Include package data (like config files)
    package_data={
        '': ['*.toml'],  # Include all .toml files
    },
    data_files=[("", ["config.toml"])],
    # Make sure the package is zip_safe=False for reliable imports
    zip_safe=False,
)
