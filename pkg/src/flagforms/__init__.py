"""Computational workbench for linear-form averages and Gowers uniformity norms."""

__version__ = "0.1.0"
