from setuptools import setup, find_packages

setup(
    name="seq2peak",
    version="1.0.0",
    description="Peak-hour series forecasting with cyclic normalization and a differentiable daily-max decoder",
    packages=find_packages(where="src"),
    package_dir={"": "src"},
    python_requires='>=3.10',
    install_requires=[
        "pandas>=2.3.0",
        "numpy>=1.24.0",
        "scipy>=1.10.0",
        "statsmodels>=0.14.0",
        "matplotlib>=3.7.0",
        "tqdm>=4.65.0",
        "requests>=2.28.0",
    ],
    entry_points={"console_scripts": ["seq2peak=seq2peak.cli:main"]},
)
