"""Numerical norm certificates for composition operators between reproducing kernel Hilbert spaces."""

__version__ = "0.1.0"
