"""Basic docstring for my module."""
