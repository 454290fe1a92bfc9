"""Headless indoor exploration engine for a simulated aerial robot."""

__version__ = "0.1.0"
