"""Bandit learning of stable matchings in two-sided markets with interviews."""

__version__ = "0.1.0"
