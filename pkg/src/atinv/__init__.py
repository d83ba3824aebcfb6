"""Evaluation and mass-loss invariants for approximately transitive systems."""

__version__ = "0.1.0"
