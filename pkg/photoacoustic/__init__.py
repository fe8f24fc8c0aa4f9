"""Reconstruction of photoacoustic initial data from boundary pressure on the unit sphere/circle."""

__version__ = "1.0.0"
