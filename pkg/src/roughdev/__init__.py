"""
roughdev — large and moderate deviations for rough differential equations.

Layers, bottom-up:
- ``roughdev.rough``     truncated tensor algebra, rough paths, controlled paths, RDE solver
- ``roughdev.gaussian``  fBM / BM sampling, lifts, Cameron–Martin controls
- ``roughdev.slowfast``  slow-fast systems, averaging, Khasminskii decomposition
- ``roughdev.devlab``    deviation processes, rate functions, Monte Carlo tails
"""

__version__ = "0.1.0"
