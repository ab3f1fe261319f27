"""Numerical geometry of real and complex nilpotent orbits."""
__version__ = "0.1.0"
