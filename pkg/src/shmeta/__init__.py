"""1D Swift-Hohenberg metastability lab."""

__version__ = "0.1.0"
