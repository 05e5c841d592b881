"""Randomized-measurement OTOC laboratory."""

__version__ = "0.1.0"
