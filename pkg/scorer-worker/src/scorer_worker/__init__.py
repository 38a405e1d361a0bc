"""Sentence relevance scorer worker speaking the sentence-scorer/1 protocol."""

__version__ = "0.1.0"
