"""Randomized upper bounds on the spectral norm from a few matrix-vector products."""

__version__ = "0.1.0"
