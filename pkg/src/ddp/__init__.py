"""Degradation-driven visual question answering pipeline."""

__version__ = "0.1.0"
