"""Superradiant spin amplification toolkit."""

__version__ = "0.1.0"
