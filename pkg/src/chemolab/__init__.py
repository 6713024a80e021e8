"""Numerical laboratory for chemotaxis-growth systems with logarithmic
sensitivity and dynamic Dirichlet boundary data on an interval."""

__version__ = "0.1.0"
