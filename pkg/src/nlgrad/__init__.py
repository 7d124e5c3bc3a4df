"""Finite-horizon fractional gradients on an interval."""

__version__ = "0.1.0"
