"""Exact diagonalization and gap bounds for a truncated pseudopotential chain."""

__version__ = "0.1.0"
