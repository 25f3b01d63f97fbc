"""
Seeded sampling of fractional and standard Brownian motion on uniform grids.

Every trajectory draws from its own generator keyed by (seed, index, stream),
so a batch can be cut into chunks in any way without changing a single path.
"""

from __future__ import annotations

import logging
from collections.abc import Sequence
from functools import lru_cache
from typing import Optional

import numpy as np
from numpy.typing import NDArray
from pydantic import BaseModel, ConfigDict, Field, model_validator
from scipy import linalg

from roughdev.core import GaussianConfig
from roughdev.core.errors import CovarianceError
from roughdev.rough.algebra import Array, PiecewiseLinearPath

logger = logging.getLogger(__name__)

# RNG streams
FBM_STREAM = 0
BM_STREAM = 1
FAST_STREAM = 2
ERGODIC_STREAM = 3


class FbmSpec(BaseModel):
    """fBM of Hurst index H on n_steps uniform cells of [0, horizon]."""

    model_config = ConfigDict(frozen=True)

    hurst: float
    dim: int = Field(default=1, ge=1)
    n_steps: int = Field(default=256, ge=2)
    horizon: float = Field(default=1.0, gt=0.0)
    test_mode: bool = False
    cholesky_max: int = Field(default=4096, ge=2)

    @model_validator(mode="after")
    def _check_hurst(self) -> "FbmSpec":
        if self.test_mode and self.hurst == 0.5:
            return self
        if not 0.25 < self.hurst < 1.0 / 3.0:
            raise ValueError(f"hurst={self.hurst} outside (1/4, 1/3)")
        return self

    @classmethod
    def from_config(cls, config: GaussianConfig) -> "FbmSpec":
        return cls(
            hurst=config.hurst,
            dim=config.dim_fbm,
            n_steps=config.n_steps,
            horizon=config.horizon,
            test_mode=config.test_mode,
            cholesky_max=config.cholesky_max,
        )

    @property
    def times(self) -> Array:
        return np.linspace(0.0, self.horizon, self.n_steps + 1)


def trajectory_rng(seed: int, index: int, stream: int = FBM_STREAM) -> np.random.Generator:
    return np.random.default_rng([seed, index, stream])


def fbm_covariance(s: NDArray[np.float64], t: NDArray[np.float64], hurst: float) -> Array:
    """R_H(s, t) = ½(s^{2H} + t^{2H} − |t − s|^{2H}), broadcast."""
    two_h = 2.0 * hurst
    return 0.5 * (np.abs(s) ** two_h + np.abs(t) ** two_h - np.abs(t - s) ** two_h)


@lru_cache(maxsize=16)
def cholesky_factor(hurst: float, n_steps: int, horizon: float) -> Array:
    """Lower Cholesky factor of R_H on the positive grid points."""
    t = np.linspace(0.0, horizon, n_steps + 1)[1:]
    cov = fbm_covariance(t[:, None], t[None, :], hurst)
    try:
        factor = linalg.cholesky(cov, lower=True)
    except linalg.LinAlgError as exc:
        raise CovarianceError(
            f"fBM covariance with {n_steps} steps is not numerically positive definite; "
            "try a lower resolution",
            hurst=hurst,
            n_steps=n_steps,
        ) from exc
    factor.setflags(write=False)
    return factor


def davies_harte_increments(
    hurst: float, n_steps: int, horizon: float, rng: np.random.Generator, dim: int
) -> Array:
    """fGn increments (n_steps, dim) by circulant embedding of the autocovariance."""
    dt = horizon / n_steps
    k = np.arange(n_steps + 1, dtype=float)
    two_h = 2.0 * hurst
    gamma = 0.5 * (np.abs(k + 1) ** two_h - 2.0 * k**two_h + np.abs(k - 1) ** two_h) * dt**two_h
    row = np.concatenate([gamma, gamma[-2:0:-1]])
    eig = np.fft.fft(row).real
    if np.min(eig) < -1e-10 * np.max(eig):
        raise CovarianceError(
            "circulant embedding is not positive semidefinite; try a lower resolution",
            hurst=hurst,
            n_steps=n_steps,
        )
    size = row.shape[0]
    noise = rng.standard_normal((size, dim)) + 1j * rng.standard_normal((size, dim))
    z = np.fft.fft(np.sqrt(np.clip(eig, 0.0, None) / size)[:, None] * noise, axis=0)
    return z.real[:n_steps]


def sample_fbm_batch(spec: FbmSpec, seed: int, indices: Sequence[int]) -> Array:
    """fBM values (B, N+1, d) starting at 0, one generator per index."""
    n = spec.n_steps
    out = np.zeros((len(indices), n + 1, spec.dim))
    if n <= spec.cholesky_max:
        factor = cholesky_factor(spec.hurst, n, spec.horizon)
        # one product per path keeps every path independent of the chunking
        for b, i in enumerate(indices):
            out[b, 1:] = factor @ trajectory_rng(seed, i, FBM_STREAM).standard_normal((n, spec.dim))
        return out
    logger.warning(
        "n_steps=%d above %d: using circulant embedding (approximate path regularity)",
        n,
        spec.cholesky_max,
    )
    for b, i in enumerate(indices):
        inc = davies_harte_increments(
            spec.hurst, n, spec.horizon, trajectory_rng(seed, i, FBM_STREAM), spec.dim
        )
        out[b, 1:] = np.cumsum(inc, axis=0)
    return out


def sample_fbm(spec: FbmSpec, seed: int, index: int = 0) -> PiecewiseLinearPath:
    return PiecewiseLinearPath(spec.times, sample_fbm_batch(spec, seed, [index])[0])


def sample_bm_batch(
    times: Array, dim: int, seed: int, indices: Sequence[int], stream: int = BM_STREAM
) -> Array:
    """Standard BM values (B, N+1, dim) on ``times``."""
    dt = np.diff(times)
    out = np.zeros((len(indices), times.shape[0], dim))
    for b, i in enumerate(indices):
        z = trajectory_rng(seed, i, stream).standard_normal((dt.shape[0], dim))
        out[b, 1:] = np.cumsum(z * np.sqrt(dt)[:, None], axis=0)
    return out


def sample_mixed_batch(
    config: GaussianConfig, seed: int, indices: Sequence[int]
) -> tuple[Array, Array, Optional[Array]]:
    """(times, fBM values, BM values or None) for a batch of indices."""
    spec = FbmSpec.from_config(config)
    fbm = sample_fbm_batch(spec, seed, indices)
    bm = sample_bm_batch(spec.times, config.dim_bm, seed, indices) if config.dim_bm else None
    return spec.times, fbm, bm


__all__ = [
    "FBM_STREAM",
    "BM_STREAM",
    "FAST_STREAM",
    "ERGODIC_STREAM",
    "FbmSpec",
    "trajectory_rng",
    "fbm_covariance",
    "cholesky_factor",
    "davies_harte_increments",
    "sample_fbm_batch",
    "sample_fbm",
    "sample_bm_batch",
    "sample_mixed_batch",
]
