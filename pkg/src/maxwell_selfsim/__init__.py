"""Generalized Maxwell models: spectral analysis, self-similar profiles and evolution."""

__version__ = "0.1.0"
