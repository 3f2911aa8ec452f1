"""Fast renormalization-group decoding of the toric code."""

__version__ = "0.1.0"
