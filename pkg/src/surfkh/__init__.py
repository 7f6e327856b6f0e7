"""Exact Khovanov-type homology of links in thickened surfaces."""

__version__ = "0.1.0"
