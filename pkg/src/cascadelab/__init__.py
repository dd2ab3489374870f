"""Threshold cascades on hierarchical blockmodels, gadgets and reductions."""

__version__ = "0.1.0"
