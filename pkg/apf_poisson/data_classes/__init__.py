"""Immutable domain types and their JSON codecs."""
