"""Diffusion codebook compression protocols and a bit-flip robustness bench."""

__version__ = "0.1.0"
