"""Fake-news detection from retrieval distances to a real-news embedding index."""

__version__ = "0.1.0"
