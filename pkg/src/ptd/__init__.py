"""Prompt-driven texture dataset synthesis, curation, and evaluation."""

__version__ = "0.1.0"
