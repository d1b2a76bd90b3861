"""Numerical laboratory for Ward's integrable chiral model in 2+1 dimensions."""

__version__ = "0.1.0"
