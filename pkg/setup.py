from setuptools import setup, find_packages

with open("README.md", "r", encoding="utf-8") as fh:
    long_description = fh.read()

with open("requirements.txt", "r", encoding="utf-8") as fh:
    requirements = [line.strip() for line in fh if line.strip() and not line.startswith("#")]

setup(
    name="geodesic-lab",
    version="0.1.0",
    author="Geodesic Lab Team",
    author_email="dev@example.com",
    description="Numerical lab for integrable geodesic flows, Poisson brackets and topological entropy",
    long_description=long_description,
    long_description_content_type="text/markdown",
    url="https://github.com/yourusername/geodesic-lab",
    packages=find_packages(),
    classifiers=[
        "Development Status :: 3 - Alpha",
        "Intended Audience :: Science/Research",
        "License :: OSI Approved :: MIT License",
        "Operating System :: OS Independent",
        "Programming Language :: Python :: 3",
        "Programming Language :: Python :: 3.9",
        "Programming Language :: Python :: 3.10",
        "Programming Language :: Python :: 3.11",
        "Topic :: Scientific/Engineering :: Mathematics",
    ],
    python_requires=">=3.9",
    install_requires=requirements,
    extras_require={"dev": ["pytest>=7.4", "pytest-asyncio>=0.21", "hypothesis>=6.90"]},
    entry_points={
        "console_scripts": [
            "geodesic-lab=src.cli:main",
        ],
    },
)