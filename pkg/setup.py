"""
Setup configuration for the toonphoto package
"""

from setuptools import setup, find_packages

# Read the README file
with open("README.md", "r", encoding="utf-8") as fh:
    long_description = fh.read()

# Read requirements
with open("requirements.txt", "r", encoding="utf-8") as fh:
    requirements = [line.strip() for line in fh if line.strip() and not line.startswith("#")]

setup(
    name="toonphoto-gan",
    version="0.1.0",
    author="Your Name",
    author_email="your.email@example.com",
    description="Unpaired cartoon-to-photo translation with spectrally normalized PatchGAN discriminators",
    long_description=long_description,
    long_description_content_type="text/markdown",
    url="https://github.com/yourusername/toonphoto-gan",
    packages=find_packages(exclude=["tests", "tests.*", "examples", "examples.*", "scripts"]),
    classifiers=[
        "Development Status :: 3 - Alpha",
        "Intended Audience :: Science/Research",
        "Topic :: Scientific/Engineering :: Artificial Intelligence",
        "Topic :: Scientific/Engineering :: Image Processing",
        "License :: OSI Approved :: MIT License",
        "Operating System :: OS Independent",
        "Programming Language :: Python :: 3",
    ],
    python_requires=">=3.9",
    install_requires=requirements,
    extras_require={
        "dev": [
            "pytest>=7.0.0",
            "pytest-cov>=4.0.0",
            "black>=23.0.0",
            "flake8>=6.0.0",
            "mypy>=1.0.0",
        ],
    },
    entry_points={
        "console_scripts": [
            "toonphoto=toonphoto.cli:main",
        ],
    },
    keywords=[
        "gan",
        "cyclegan",
        "image-translation",
        "spectral-normalization",
        "patchgan",
        "fid",
        "pytorch",
    ],
)
