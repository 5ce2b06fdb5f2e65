"""Monte Carlo resilience simulation for radial distribution networks under wind."""

__version__ = "0.1.0"
