"""Exact finite-field certificates for a transcendental Brauer-Manin obstruction example."""

__version__ = "0.1.0"
