"""Vine-copula Granger causality tests."""

__version__ = "0.1.0"
