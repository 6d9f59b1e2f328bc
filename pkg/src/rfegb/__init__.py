"""Recursive feature elimination with gradient-boosted trees for binary tabular data."""

__version__ = "0.1.0"
