"""Temporal conjunctive query reasoning over DL-Lite knowledge bases."""

__version__ = "0.1.0"
