"""Bot-amplification analysis of scholarly article sharing."""

__version__ = "0.1.0"
