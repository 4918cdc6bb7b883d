"""Meme classification and text-to-meme retrieval toolkit."""

__version__ = "0.1.0"
