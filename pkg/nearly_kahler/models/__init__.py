"""Closed-form homogeneous solutions."""
