"""Exterior algebra and invariant calculus."""
