"""Spectral laboratory for dark solitons of the nonlocal Gross-Pitaevskii equation."""

__version__ = "0.1.0"
