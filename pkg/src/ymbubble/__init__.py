"""Numerical workbench for instanton bubbling in SU(2) Yang-Mills on the 4-ball."""

__version__ = "0.1.0"
