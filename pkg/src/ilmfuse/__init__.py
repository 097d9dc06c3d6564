"""Desk-scale internal language model estimation and fusion lab."""

__version__ = "0.1.0"
