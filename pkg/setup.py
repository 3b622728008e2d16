"""Setup configuration for the ablatron loading simulator."""

from setuptools import setup, find_namespace_packages

setup(
    name="ablatron",
    version="0.4.0",
    description="Simulator for loading ion traps by pulsed laser ablation and photoionization",
    author="Ablatron Team",
    packages=find_namespace_packages(include=["src", "src.*", "config"]),
    py_modules=["app"],
    python_requires=">=3.9",
    install_requires=[
        "numpy>=1.24.0",
        "scipy>=1.10.0",
        "pydantic>=2.5.0",
    ],
    extras_require={
        "dev": [
            "pytest>=7.4.3",
            "pytest-mock>=3.12.0",
            "pylint>=3.0.3",
            "black>=23.12.1",
        ]
    },
    entry_points={
        "console_scripts": ["ablatron=app:main"],
    },
)
