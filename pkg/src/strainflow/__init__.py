"""Sankey summaries of strain localisation in time-resolved displacement fields."""

__version__ = "0.1.0"
