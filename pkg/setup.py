"""
Setup script for hkflow, a numerical lab for Hellinger-Kantorovich gradient flows
"""

from setuptools import setup, find_packages

setup(
    name="hkflow",
    version="0.1.0",
    description="Entropy, entropy production and decay experiments for Hellinger-Kantorovich gradient flows",
    author="Your Name",
    packages=find_packages(exclude=["tests", "tests.*", "scripts"]),
    install_requires=[
        "numpy>=1.26.4",
        "pandas>=2.1.3",
        "scipy>=1.11.0",
        "scikit-learn>=1.5.0",
        "python-dotenv>=1.0.0",
    ],
    extras_require={
        "test": ["pytest>=7.4.0"],
    },
    entry_points={
        "console_scripts": [
            "hkflow=hkflow.cli:main",
        ],
    },
    python_requires=">=3.9",
)
