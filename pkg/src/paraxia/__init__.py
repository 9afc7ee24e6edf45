"""Monte Carlo and closed-form statistics of waves in a random paraxial slab."""

__version__ = "0.1.0"
