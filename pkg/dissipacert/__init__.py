"""Decide whether measured trajectories certify dissipativity of the unknown system."""
__version__ = "0.1.0"
