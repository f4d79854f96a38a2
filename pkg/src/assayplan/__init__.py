"""Similarity-guided sequential assay planning from historical outcome tables."""

__version__ = "0.1.0"
