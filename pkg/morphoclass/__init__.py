"""Taxol exposure classification from phase-contrast cell images."""

__version__ = "0.1.0"
