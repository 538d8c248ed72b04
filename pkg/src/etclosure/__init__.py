"""Exact generator and verifier for the 14-moment dense-gas closure."""

__version__ = "0.1.0"
