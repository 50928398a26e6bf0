from setuptools import setup, find_namespace_packages

with open("README.md", "r") as fh:
    long_description = fh.read()

setup(
    name="stochrec-hiddenrv",
    version="0.1.0",
    description="Hidden regular variation toolkit for diagonal stochastic recurrence equations X = AX + B: tail indices, level-set geometry, importance sampling and renewal diagnostics",
    long_description=long_description,
    long_description_content_type="text/markdown",
    packages=find_namespace_packages(include=['stochrec.*']),
    classifiers=[
        "Programming Language :: Python :: 3",
        "License :: OSI Approved :: MIT License",
        "Operating System :: OS Independent",
        "Development Status :: 3 - Alpha",
        "Intended Audience :: Science/Research",
        "Topic :: Scientific/Engineering :: Mathematics",
    ],
    python_requires=">=3.8",
    install_requires=[
        "matplotlib",
        "numpy",
        "pandas",
        "scipy",
    ],
    entry_points={
        "console_scripts": [
            "sre-hrv = stochrec.hiddenrv.cli:main",
        ],
    },
    keywords="stochastic recurrence equation, Kesten-Goldie, GARCH, hidden regular variation, tail index, importance sampling, Esscher tilt, renewal measure, spectral measure",
    license="MIT",
    include_package_data=True,
    zip_safe=False
)
