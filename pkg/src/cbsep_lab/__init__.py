"""Exact spectral analysis and graphical-construction simulation of CBSEP-type dynamics."""

__version__ = "0.1.0"
