"""Exact and asymptotic branch statistics for N-spin measurements without collapse."""

__version__ = "0.1.0"
