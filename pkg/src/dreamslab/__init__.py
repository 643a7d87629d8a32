"""Deterministic active-SLAM laboratory."""

__version__ = "0.1.0"
