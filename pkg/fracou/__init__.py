"""Fractional Ornstein-Uhlenbeck processes of the first and second kind."""

__version__ = "1.0.0"
