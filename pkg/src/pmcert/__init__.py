"""Exact sum-of-squares positivity certificates for symmetric polynomial matrices."""
