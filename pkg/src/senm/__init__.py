"""Signed ego networks from interaction timelines."""

__version__ = "0.1.0"
