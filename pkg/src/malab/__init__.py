"""Numerical toolkit for multiple-access, near-field and ISAC experiments."""

__version__ = "0.1.0"
