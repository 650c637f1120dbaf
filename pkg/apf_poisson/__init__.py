"""Goodness of fit testing for Poisson processes with shift and scale parameters."""
