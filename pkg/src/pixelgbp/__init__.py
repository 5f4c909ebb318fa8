"""Pixel-distributed frame-to-frame rotation estimation via Gaussian belief propagation."""

__version__ = "0.1.0"
