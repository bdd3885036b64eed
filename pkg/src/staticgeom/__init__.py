"""Geometry checks for standard static space-times."""

__version__ = "0.1.0"
