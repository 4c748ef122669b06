"""Numerical Teichmüller-TQFT volume pipeline for the 7₃ knot complement."""

__version__ = "0.1.0"
