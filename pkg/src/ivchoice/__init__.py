"""Instrumental-variable estimation, partial identification and robust treatment choice."""

__version__ = "0.1.0"
