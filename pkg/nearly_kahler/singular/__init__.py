"""Singular initial value problem at the S3 orbit."""
