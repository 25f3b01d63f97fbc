"""
Lifts of fBM and of the mixed pair (b^H, w) to rough paths.

The joint lift takes the fBM coordinates first (0..d-1) and the BM
coordinates after them (d..d+e-1).  Cross integrals are either geometric
(Stratonovich-type, the signature of the joint piecewise-linear path) or
forward Itô: each cell then moves w first and b second, which puts
I[b, w] = 0 and I[w, b] = Δw ⊗ Δb on the cell and keeps the lift geometric.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, replace
from typing import Optional

import numpy as np

from roughdev.core.errors import InvalidInputError
from roughdev.core.scenario import LiftMode
from roughdev.rough.algebra import Array, Levels, PiecewiseLinearPath, chen_levels, segment_levels
from roughdev.rough.rde import DriverBatch
from roughdev.rough.roughpath import (
    HolderExponents,
    RoughPath,
    chen_reconstruct,
    from_blocks,
    from_signature_path,
)

logger = logging.getLogger(__name__)


def lift_fbm(path: PiecewiseLinearPath, exponents: HolderExponents) -> RoughPath:
    """Canonical geometric lift of a sampled fBM path."""
    return from_signature_path(path, exponents)


def _staircase_levels(fbm_inc: Array, bm_inc: Array) -> Levels:
    """Cell levels of "move w, then move b" in the joint coordinates (b, w)."""
    zeros_b = np.zeros_like(fbm_inc)
    zeros_w = np.zeros_like(bm_inc)
    w_step = segment_levels(np.concatenate([zeros_b, bm_inc], axis=-1))
    b_step = segment_levels(np.concatenate([fbm_inc, zeros_w], axis=-1))
    return chen_levels(w_step, b_step)


def mixed_levels(
    fbm_values: Array, bm_values: Optional[Array], mode: LiftMode | str
) -> tuple[Levels, bool]:
    """
    Cell levels for (possibly batched) value arrays (..., N+1, d) and (..., N+1, e).

    Returns the levels and whether they are exact segment signatures.
    """
    mode = LiftMode(mode)
    fbm_inc = np.diff(fbm_values, axis=-2)
    if bm_values is None or bm_values.shape[-1] == 0:
        return segment_levels(fbm_inc), True
    bm_inc = np.diff(bm_values, axis=-2)
    if mode is LiftMode.GEOMETRIC:
        return segment_levels(np.concatenate([fbm_inc, bm_inc], axis=-1)), True
    return _staircase_levels(fbm_inc, bm_inc), False


@dataclass(frozen=True)
class MixedLift:
    """
    Joint lift of (b^H, w) with its coordinate split.

    ``rough_path`` carries the fBM in coordinates 0..dim_fbm-1 and the BM
    after them; without a BM it is the fBM lift alone.
    """

    rough_path: RoughPath
    dim_fbm: int
    mode: LiftMode = LiftMode.GEOMETRIC

    def __post_init__(self) -> None:
        if not 0 < self.dim_fbm <= self.rough_path.dim:
            raise InvalidInputError(
                f"dim_fbm={self.dim_fbm} does not fit a {self.rough_path.dim}-dimensional lift"
            )
        object.__setattr__(self, "mode", LiftMode(self.mode))

    @property
    def dim_bm(self) -> int:
        return self.rough_path.dim - self.dim_fbm

    @property
    def fbm(self) -> RoughPath:
        """The fBM block of the lift."""
        return project(self.rough_path, 0, self.dim_fbm)

    @property
    def bm(self) -> Optional[RoughPath]:
        if self.dim_bm == 0:
            return None
        return project(self.rough_path, self.dim_fbm, self.rough_path.dim)

    def cross(self, s: float, t: float, order: str = "bw") -> Array:
        if self.dim_bm == 0:
            raise InvalidInputError("a lift without BM has no cross integrals")
        return cross_integral(self.rough_path, self.dim_fbm, s, t, order)


def project(rp: RoughPath, start: int, stop: int) -> RoughPath:
    """Coordinates start..stop-1 of ``rp``; each cell keeps its group-like block."""
    sl = slice(start, stop)
    return replace(
        rp,
        path=rp.path[:, sl],
        block2=rp.block2[:, sl, sl],
        block3=rp.block3[:, sl, sl, sl],
    )


def lift_mixed(
    fbm: PiecewiseLinearPath,
    bm: Optional[PiecewiseLinearPath],
    exponents: HolderExponents,
    mode: LiftMode | str = LiftMode.GEOMETRIC,
) -> MixedLift:
    """Joint rough path over (b^H, w)."""
    if bm is None:
        return MixedLift(lift_fbm(fbm, exponents), fbm.dim, mode)
    if fbm.times.shape != bm.times.shape or not np.allclose(fbm.times, bm.times):
        raise InvalidInputError("fBM and BM must be sampled on the same grid")
    levels, exact = mixed_levels(fbm.values, bm.values, mode)
    values = np.concatenate([fbm.values, bm.values], axis=1)
    rp = from_blocks(fbm.times, values, levels[1], levels[2], exponents, piecewise_linear=exact)
    logger.debug("mixed lift over %d cells, mode %s", rp.n_steps, LiftMode(mode).value)
    return MixedLift(rp, fbm.dim, mode)


def lift_mixed_batch(
    times: Array,
    fbm_values: Array,
    bm_values: Optional[Array],
    exponents: HolderExponents,
    mode: LiftMode | str = LiftMode.GEOMETRIC,
    scale: float = 1.0,
) -> DriverBatch:
    """Lift a batch (B, N+1, .) of sampled paths, dilated by ``scale``."""
    levels, exact = mixed_levels(fbm_values, bm_values, mode)
    if scale != 1.0:
        levels = (scale * levels[0], scale**2 * levels[1], scale**3 * levels[2])
    return DriverBatch(times, levels, exponents, exact)


def cross_integral(
    rp: RoughPath, dim_fbm: int, s: float, t: float, order: str = "bw"
) -> Array:
    """I[b, w]_{s,t} (order "bw") or I[w, b]_{s,t} (order "wb") from the joint lift."""
    if not 0 < dim_fbm < rp.dim:
        raise InvalidInputError(f"dim_fbm={dim_fbm} does not split a {rp.dim}-dimensional lift")
    x2 = chen_reconstruct(rp, s, t).level2
    if order == "bw":
        return x2[:dim_fbm, dim_fbm:]
    if order == "wb":
        return x2[dim_fbm:, :dim_fbm]
    raise InvalidInputError(f"order must be 'bw' or 'wb', got {order!r}")


__all__ = [
    "lift_fbm",
    "mixed_levels",
    "MixedLift",
    "project",
    "lift_mixed",
    "lift_mixed_batch",
    "cross_integral",
]
