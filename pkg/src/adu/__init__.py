"""Acoustic unit discovery and query-by-example spoken term detection."""

__version__ = "0.1.0"
