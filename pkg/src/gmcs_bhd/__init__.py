"""Noise budgeting and key-rate modelling for GMCS QKD with a practical
balanced homodyne detector."""

__version__ = "0.1.0"
