from setuptools import setup

setup(
    name="xmd",
    version="0.1.0",
    description="A desk-scale lab for soft-constrained cross-modal knowledge distillation",
    py_modules=["xmd"],
    packages=["src", "src.cli"],
    install_requires=[
        "PyYAML>=6.0",
        "numpy>=1.22",
        "rich>=13.0",
    ],
    entry_points={
        "console_scripts": [
            "xmd=xmd:main",
        ],
    },
    python_requires=">=3.9",
)
