"""Bimanual affordance transfer and few-shot adaptation on procedural articulated objects."""

__version__ = "0.1.0"
