"""Steepest-entropy-ascent density-matrix dynamics."""

__version__ = "0.1.0"
