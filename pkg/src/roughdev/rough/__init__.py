"""Truncated tensor algebra, rough paths, controlled paths and RDE solvers."""
