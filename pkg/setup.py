from setuptools import setup, find_packages

setup(
    name="clicksim",
    version="2026.10.17",
    description="Click model workbench: PGM click models, a GRU click policy trained by adversarial imitation, and evaluation harnesses",
    long_description=open("README.md").read(),
    long_description_content_type="text/markdown",
    license="GNU GPL v3.0",
    keywords="click models search user simulation imitation learning",
    packages=find_packages(exclude=["tests"]),
    install_requires=[
        "numpy",
        "scipy>=1.7",
        "python-dotenv>=1.0.0",
        "matplotlib",
    ],
    extras_require={
        "test": ["pytest"],
        "docs": ["mkdocs", "mkdocs-material", "mkdocstrings[python]"],
    },
    entry_points={
        "console_scripts": ["clicksim=clicksim.cli:main"],
    },
    python_requires='>=3.9',
)
