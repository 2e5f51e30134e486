"""Run configuration and manifest schemas."""
