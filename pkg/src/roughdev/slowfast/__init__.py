"""Slow-fast systems: coefficients, multiscale simulation, averaging and the Khasminskii decomposition."""
