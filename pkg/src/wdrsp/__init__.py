"""Data-driven Wasserstein distributionally robust shortest paths."""

__version__ = "0.1.0"
