"""Depolarisation-noise differential privacy and certified robustness
for small density-matrix-simulated quantum classifiers, with a classical
Laplace-mechanism baseline and a bounded-norm attack harness."""

__version__ = "0.1.0"
