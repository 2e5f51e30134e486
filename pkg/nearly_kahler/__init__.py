"""Cohomogeneity-one nearly Kahler structures for SU2 x SU2."""

__version__ = "0.1.0"
