"""Exact local explanations and Rademacher-gap tests of their informativeness."""

__version__ = "0.1.0"
