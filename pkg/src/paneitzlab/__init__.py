"""Numerical toolkit for the Paneitz operator and its Green's function on S^3."""

__version__ = "0.1.0"
