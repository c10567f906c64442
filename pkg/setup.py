from setuptools import find_packages, setup

setup(
    name="bubblescope",
    version="0.1.0",
    description="Bubble and crash diagnostics for price series",
    package_dir={"": "src"},
    packages=find_packages(where="src"),
    python_requires=">=3.10",
    install_requires=[
        "numpy>=1.26.0",
        "scipy>=1.11.4",
        "pandas>=2.1.4",
        "pydantic>=2.5.3",
        "python-dateutil>=2.8.2",
        "python-dotenv>=1.0.0",
        "appdirs>=1.4.4",
    ],
    entry_points={"console_scripts": ["bubblescope=bubblescope.main:main"]},
)
