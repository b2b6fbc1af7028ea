"""Displacement-index analytics for citation graphs."""

__version__ = "0.1.0"
