"""Effective measurement uncertainty of a continuously monitored oscillator."""

__version__ = "0.1.0"
