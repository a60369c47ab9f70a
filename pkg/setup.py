import re

from setuptools import setup

with open("claimcheck/version.py", "r", encoding="utf-8") as file:
    version = file.readline()

match = re.match(r"^__version__ = \"([\d\.]+)\"$", version)

if match:
    __version__ = match.group(1)
else:
    raise RuntimeError()

with open("README.md", "r", encoding="utf-8") as file:
    long_description = file.read()

setup(
    name="claimcheck",
    packages=["claimcheck"],
    version=__version__,
    description="Multi-claim statement verification over a knowledge graph.",
    long_description=long_description,
    long_description_content_type="text/markdown",
    python_requires=">=3.8",
    keywords="knowledge graph fact checking graph convolution attention",
    license="Apache 2.0",
    zip_safe=False,
    install_requires=["torch>=2.2", "numpy", "scikit-learn", "tqdm", "tabulate"],
    classifiers=[
        "Development Status :: 3 - Alpha",
        "Intended Audience :: Science/Research",
        "License :: OSI Approved :: Apache Software License",
        "Programming Language :: Python",
        "Programming Language :: Python :: 3.8",
        "Topic :: Scientific/Engineering :: Artificial Intelligence",
        "Operating System :: OS Independent",
    ],
    entry_points={"console_scripts": ["claimcheck = claimcheck.main:main"]},
)
