"""Global (whole-interval) propagation of driven quantum systems."""

__version__ = "0.1.0"
