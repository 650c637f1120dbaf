"""Estimation, simulation and testing algorithms."""
