"""Collision probability between a secondary object and a tethered spacecraft."""

__version__ = "0.1.0"
