"""Characterizing ODE systems, integrals and transformations."""
