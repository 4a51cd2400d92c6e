from setuptools import setup, find_packages

setup(
    name="sontag_clf",
    version="0.1.0",
    packages=find_packages(include=["sontag_clf", "sontag_clf.*"]),
    install_requires=[
        "numpy",
        "scipy",
        "pandas",
        "pyarrow",
        "tenacity",
        "jsonschema",
    ],
    entry_points={"console_scripts": ["sontag-clf = sontag_clf.cli:main"]},
)
