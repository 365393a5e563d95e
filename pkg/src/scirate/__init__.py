"""Finite-truncation experiments on Rips complexes of finitely generated groups:
simple connectivity certificates, vanishing-rate brackets at infinity, and
quasi-isometry transport of disk fillings."""

__version__ = "0.1.0"
