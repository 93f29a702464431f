"""Skat engine with bitvector knowledge tracking and paranoia search."""

__version__ = "0.1.0"
