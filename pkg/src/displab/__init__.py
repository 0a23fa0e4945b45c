"""Numerical laboratory for low-frequency dispersive estimates of -Delta + V."""

__version__ = "0.1.0"
