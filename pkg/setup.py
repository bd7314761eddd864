from setuptools import setup, find_packages

setup(
    name="levsample",
    version="0.1.0",
    packages=find_packages(where="src"),
    package_dir={'': 'src'},
    install_requires=[
        "numpy~=1.26.0",
        "scipy~=1.11.0",
        "pandas~=2.1.0",
        "marshmallow~=3.20.1",
        "tqdm~=4.66.1",
        "flask~=2.3.2",
        "flask_cors~=3.0.10",
        "flask_caching~=2.0.0",
    ],
    entry_points={
        "console_scripts": [
            "levsample=levsample.cli:main",
        ]
    }
)
