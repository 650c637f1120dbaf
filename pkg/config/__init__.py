"""Default configuration for the apf_poisson package."""
