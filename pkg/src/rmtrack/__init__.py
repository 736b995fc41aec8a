"""Correlation-filter tracking with clustered reliable memories."""

__version__ = "0.1.0"
