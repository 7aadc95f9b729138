"""Outbreak-year classification from incomplete country-year indicator panels."""

__version__ = "0.1.0"
