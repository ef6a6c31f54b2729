"""Prior-free inferential models for the Cauchy location-scale family."""

__version__ = "0.1.0"
