"""Monotone conjugates and biconjugates over self-dual cones."""
__version__ = "0.1.0"
