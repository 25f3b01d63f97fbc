"""Deviation experiments: deviation processes, rate functions, Monte Carlo tails and slope checks."""
