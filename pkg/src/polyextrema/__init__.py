"""Polynomial-chaos global and extremum sensitivity analysis."""

__version__ = "0.1.0"
