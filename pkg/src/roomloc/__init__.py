"""Sparse localization of sound sources in reverberant 2D rooms."""

__version__ = "0.1.0"
