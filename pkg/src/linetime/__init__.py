"""Occupancy times of diffusions along lines: exact laws, joint moments and simulation."""

__version__ = "0.1.0"
