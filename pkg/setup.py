"""
Setup script for the cvmdi-qkd package.
"""

from setuptools import setup, find_packages

setup(
    name="cvmdi-qkd",
    version="0.1.0",
    packages=find_packages(exclude=["tests", "tests.*", "examples", "examples.*"]),
    install_requires=[
        "pandas>=1.0.0",
        "numpy>=1.18.0",
        "scipy>=1.7.0",
        "python-dotenv>=0.19.0",
        "aws-lambda-powertools>=1.25.0",
    ],
    extras_require={
        "test": ["pytest>=7.0"],
    },
    entry_points={
        "console_scripts": [
            "cvmdi-qkd=src.main:main",
        ],
    },
    description="Key rates, security thresholds and Monte Carlo simulation for CV-MDI-QKD",
    keywords="qkd, continuous-variable, gaussian, mdi, key rate",
    python_requires=">=3.8",
)
