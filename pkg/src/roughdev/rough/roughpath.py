"""
Discrete α-Hölder rough paths X = (X¹, X², X³) on a time grid.

A ``RoughPath`` stores the level-1 path values on the grid plus the level-2
and level-3 blocks of consecutive grid cells.  Two-parameter values X_{s,t}
for grid points s < t are rebuilt by Chen's relation; Hölder norms sweep all
grid pairs (or aligned dyadic pairs for long grids).
"""

from __future__ import annotations

import logging
from collections.abc import Iterator
from dataclasses import dataclass, replace
from typing import Optional

import numpy as np
import pandas as pd
from numpy.typing import ArrayLike
from pydantic import BaseModel, ConfigDict, model_validator

from roughdev.core.errors import InvalidInputError, InvariantError
from roughdev.core.scenario import PairMode
from roughdev.rough.algebra import (
    Array,
    Levels,
    PiecewiseLinearPath,
    TruncatedTensor,
    chen_levels,
    dilate_levels,
    fold_chen,
    outer11,
    outer12,
    outer21,
    segment_levels,
    shuffle_defects,
    signature,
)

logger = logging.getLogger(__name__)

DYADIC_THRESHOLD = 4096


# ---------------------------------------------------------------------------
# Exponents
# ---------------------------------------------------------------------------


class HolderExponents(BaseModel):
    """α (driver), β (solution, β < α) and γ (Cameron–Martin / BM side)."""

    model_config = ConfigDict(frozen=True)

    alpha: float = 0.29
    beta: float = 0.28
    gamma: float = 0.49

    @model_validator(mode="after")
    def _check(self) -> "HolderExponents":
        if not 0.25 < self.beta < self.alpha <= 1.0 / 3.0:
            raise ValueError(
                f"need 1/4 < beta < alpha <= 1/3, got alpha={self.alpha}, beta={self.beta}"
            )
        if 2.0 * self.alpha + self.gamma <= 1.0:
            raise ValueError(
                f"need 2*alpha + gamma > 1, got alpha={self.alpha}, gamma={self.gamma}"
            )
        return self

    @classmethod
    def for_hurst(cls, hurst: float, kappa: float = 0.01) -> "HolderExponents":
        """α = H − κ (capped at 1/3), β = α − κ, γ = 1/2 − κ; κ shrinks near H = 1/4."""
        if hurst <= 0.25:
            raise InvalidInputError(f"hurst={hurst} must exceed 1/4")
        kappa = min(kappa, (hurst - 0.25) / 3.0)
        alpha = min(hurst - kappa, 1.0 / 3.0)
        return cls(alpha=alpha, beta=alpha - kappa, gamma=0.5 - kappa)


def variation_exponents(hurst: float, kappa: float = 0.01) -> tuple[float, float]:
    """(p, q) with 1/p = H − 2κ for the driver and 1/q = H + 1/2 − κ for Cameron–Martin paths."""
    return 1.0 / (hurst - 2.0 * kappa), 1.0 / (hurst + 0.5 - kappa)


# ---------------------------------------------------------------------------
# RoughPath
# ---------------------------------------------------------------------------


def _frozen(a: ArrayLike) -> Array:
    arr = np.array(a, dtype=float)
    arr.setflags(write=False)
    return arr


@dataclass(frozen=True)
class RoughPath:
    """
    Level-1 values ``path`` (N+1, d) and cell blocks ``block2`` (N, d, d),
    ``block3`` (N, d, d, d) on ``times`` (N+1,).

    ``piecewise_linear`` marks blocks that are exact segment signatures; only
    those paths can be evaluated between grid points.
    """

    times: Array
    path: Array
    block2: Array
    block3: Array
    exponents: HolderExponents
    geometric: bool = False
    piecewise_linear: bool = False

    def __post_init__(self) -> None:
        times = _frozen(self.times)
        path = _frozen(self.path)
        b2 = _frozen(self.block2)
        b3 = _frozen(self.block3)
        if times.ndim != 1 or times.shape[0] < 2:
            raise InvalidInputError("a rough path needs at least two grid points")
        if np.any(np.diff(times) <= 0.0):
            raise InvalidInputError("grid times must be strictly increasing")
        n = times.shape[0] - 1
        if path.ndim != 2 or path.shape[0] != n + 1:
            raise InvalidInputError(f"path must have shape ({n + 1}, d), got {path.shape}")
        d = path.shape[1]
        if b2.shape != (n, d, d) or b3.shape != (n, d, d, d):
            raise InvalidInputError(
                f"block shapes {b2.shape}, {b3.shape} do not match grid ({n}) and dim ({d})"
            )
        for name, arr in (("path", path), ("block2", b2), ("block3", b3)):
            if not np.all(np.isfinite(arr)):
                raise InvalidInputError(f"{name} contains non-finite values")
        object.__setattr__(self, "times", times)
        object.__setattr__(self, "path", path)
        object.__setattr__(self, "block2", b2)
        object.__setattr__(self, "block3", b3)

    @property
    def dim(self) -> int:
        return int(self.path.shape[1])

    @property
    def n_steps(self) -> int:
        return int(self.times.shape[0] - 1)

    @property
    def horizon(self) -> float:
        return float(self.times[-1])

    @property
    def increments(self) -> Array:
        return np.diff(self.path, axis=0)

    @property
    def blocks(self) -> Levels:
        return self.increments, self.block2, self.block3

    def block(self, i: int) -> TruncatedTensor:
        return TruncatedTensor.group_like(
            (self.increments[i], self.block2[i], self.block3[i])
        )

    def as_path(self) -> PiecewiseLinearPath:
        return PiecewiseLinearPath(self.times, self.path)


# ---------------------------------------------------------------------------
# Construction
# ---------------------------------------------------------------------------


def _max_shuffle_defect(levels: Levels) -> float:
    if levels[0].shape[0] == 0:
        return 0.0
    d2, d3 = shuffle_defects(levels)
    scale = max(1.0, float(np.max(np.abs(levels[0]))) ** 3)
    return float(max(np.max(d2), np.max(d3))) / scale


def from_blocks(
    times: ArrayLike,
    path: ArrayLike,
    block2: ArrayLike,
    block3: ArrayLike,
    exponents: HolderExponents,
    *,
    piecewise_linear: bool = False,
    require_geometric: bool = True,
    tol: float = 1e-9,
) -> RoughPath:
    """Assemble a rough path from cell blocks, checking the shuffle relations."""
    rp = RoughPath(times, path, block2, block3, exponents, piecewise_linear=piecewise_linear)
    defect = _max_shuffle_defect(rp.blocks)
    if defect > tol:
        if require_geometric:
            raise InvariantError(
                f"shuffle defect {defect:.3e} exceeds {tol:.1e}", defect=defect
            )
        return rp
    return replace(rp, geometric=True)


def from_signature_path(
    path: PiecewiseLinearPath, exponents: HolderExponents, tol: float = 1e-10
) -> RoughPath:
    """Canonical geometric lift of a piecewise-linear path by its segment signatures."""
    _, b2, b3 = segment_levels(path.increments)
    return from_blocks(
        path.times, path.values, b2, b3, exponents, piecewise_linear=True, tol=tol
    )


# ---------------------------------------------------------------------------
# Chen reconstruction
# ---------------------------------------------------------------------------


def grid_index(times: Array, t: float) -> Optional[int]:
    """Index of ``t`` on the grid, or None if ``t`` falls between grid points."""
    tol = 1e-12 * max(1.0, abs(float(times[-1])))
    k = int(np.searchsorted(times, t))
    for cand in (k - 1, k):
        if 0 <= cand < times.shape[0] and abs(times[cand] - t) <= tol:
            return cand
    return None


def chen_reconstruct(rp: RoughPath, s: float, t: float) -> TruncatedTensor:
    """X_{s,t} as the ordered product of the cell blocks between s and t."""
    if s > t:
        raise InvalidInputError(f"need s <= t, got s={s}, t={t}")
    if s < rp.times[0] or t > rp.times[-1]:
        raise InvalidInputError(f"[{s}, {t}] is outside the grid span")
    if s == t:
        return TruncatedTensor.identity(rp.dim)
    i, j = grid_index(rp.times, s), grid_index(rp.times, t)
    if i is None or j is None:
        if not rp.piecewise_linear:
            raise InvalidInputError(
                "endpoints between grid points need a piecewise-linear rough path"
            )
        return signature(rp.as_path(), s, t)
    if i == j:
        return TruncatedTensor.identity(rp.dim)
    return TruncatedTensor.group_like(fold_chen(rp.blocks, i, j))


def iter_pair_levels(rp: RoughPath) -> Iterator[tuple[int, Array, Array, Array]]:
    """
    Sweep the grid by right endpoint.

    Yields ``(j, S1, S2, S3)`` where row i of each array holds the level of
    X_{t_i, t_j} for every i < j.
    """
    inc, b2, b3 = rp.blocks
    n, d = inc.shape
    s1 = np.zeros((n, d))
    s2 = np.zeros((n, d, d))
    s3 = np.zeros((n, d, d, d))
    for j in range(n):
        v = inc[j]
        if j:
            p1, p2, p3 = s1[:j], s2[:j], s3[:j]
            p3 += outer21(p2, v) + outer12(p1, b2[j]) + b3[j]
            p2 += outer11(p1, v) + b2[j]
            p1 += v
        s1[j], s2[j], s3[j] = v, b2[j], b3[j]
        yield j + 1, s1[: j + 1], s2[: j + 1], s3[: j + 1]


def iter_dyadic_levels(rp: RoughPath) -> Iterator[tuple[Array, Array, Array, Array]]:
    """Yield ``(lengths, L1, L2, L3)`` for aligned dyadic windows of 1, 2, 4, ... cells."""
    levels = rp.blocks
    lengths = np.diff(rp.times)
    while levels[0].shape[0] >= 1:
        yield (lengths, *levels)
        m = levels[0].shape[0] // 2
        if m == 0:
            break
        left = tuple(a[0 : 2 * m : 2] for a in levels)
        right = tuple(a[1 : 2 * m : 2] for a in levels)
        levels = chen_levels(left, right)  # type: ignore[arg-type]
        lengths = lengths[0 : 2 * m : 2] + lengths[1 : 2 * m : 2]


def _resolve_pairs(pairs: PairMode | str, n_steps: int, threshold: int) -> PairMode:
    mode = PairMode(pairs)
    if mode is PairMode.AUTO:
        return PairMode.ALL if n_steps <= threshold else PairMode.DYADIC
    return mode


def _pair_stream(
    rp: RoughPath, mode: PairMode
) -> Iterator[tuple[Array, Array, Array, Array]]:
    if mode is PairMode.DYADIC:
        yield from iter_dyadic_levels(rp)
        return
    for j, s1, s2, s3 in iter_pair_levels(rp):
        yield rp.times[j] - rp.times[:j], s1, s2, s3


def _norm(a: Array, rank: int) -> Array:
    axes = tuple(range(-rank, 0))
    return np.sqrt(np.sum(a * a, axis=axes))


# ---------------------------------------------------------------------------
# Norms and distances
# ---------------------------------------------------------------------------


def holder_norms(
    rp: RoughPath,
    alpha: Optional[float] = None,
    pairs: PairMode | str = PairMode.AUTO,
    threshold: int = DYADIC_THRESHOLD,
) -> tuple[float, float, float]:
    """(‖X¹‖_α, ‖X²‖_2α, ‖X³‖_3α) over grid pairs."""
    alpha = rp.exponents.alpha if alpha is None else alpha
    mode = _resolve_pairs(pairs, rp.n_steps, threshold)
    best = [0.0, 0.0, 0.0]
    for dt, *lev in _pair_stream(rp, mode):
        for k in range(3):
            ratio = _norm(lev[k], k + 1) / dt ** ((k + 1) * alpha)
            best[k] = max(best[k], float(np.max(ratio)))
    return best[0], best[1], best[2]


def holder_norm(
    rp: RoughPath,
    level: int,
    alpha: Optional[float] = None,
    pairs: PairMode | str = PairMode.AUTO,
) -> float:
    """‖Xⁱ‖_{iα} = max |Xⁱ_{s,t}| / |t − s|^{iα} over grid pairs."""
    if level not in (1, 2, 3):
        raise InvalidInputError(f"level must be 1, 2 or 3, got {level}")
    return holder_norms(rp, alpha, pairs)[level - 1]


def homogeneous_norm(
    rp: RoughPath, alpha: Optional[float] = None, pairs: PairMode | str = PairMode.AUTO
) -> float:
    """⫼X⫼_α = ‖X¹‖ + ‖X²‖^{1/2} + ‖X³‖^{1/3}."""
    n1, n2, n3 = holder_norms(rp, alpha, pairs)
    return n1 + n2 ** 0.5 + n3 ** (1.0 / 3.0)


def batch_holder_norms(times: Array, levels: Levels, alpha: float) -> Array:
    """Dyadic Hölder norms for a batch of drivers; ``levels`` are (B, N, ...) cell blocks."""
    lengths = np.diff(times)
    lev = levels
    batch = lev[0].shape[0]
    best = np.zeros((batch, 3))
    while True:
        for k in range(3):
            flat = lev[k].reshape(batch, lev[k].shape[1], -1)
            ratio = np.sqrt(np.sum(flat**2, axis=-1)) / lengths ** ((k + 1) * alpha)
            best[:, k] = np.maximum(best[:, k], np.max(ratio, axis=1))
        m = lev[0].shape[1] // 2
        if m == 0:
            return best
        left = tuple(a[:, 0 : 2 * m : 2] for a in lev)
        right = tuple(a[:, 1 : 2 * m : 2] for a in lev)
        lev = chen_levels(left, right)  # type: ignore[arg-type]
        lengths = lengths[0 : 2 * m : 2] + lengths[1 : 2 * m : 2]


def _check_same_grid(a: RoughPath, b: RoughPath) -> None:
    if a.dim != b.dim:
        raise InvalidInputError(f"dimension mismatch: {a.dim} vs {b.dim}")
    if a.times.shape != b.times.shape or not np.allclose(a.times, b.times, rtol=0, atol=1e-14):
        raise InvalidInputError("rough paths live on different grids")


def rp_distance(
    a: RoughPath,
    b: RoughPath,
    alpha: Optional[float] = None,
    pairs: PairMode | str = PairMode.AUTO,
) -> float:
    """ρ_α(a, b) = Σ_i max |aⁱ_{s,t} − bⁱ_{s,t}| / |t − s|^{iα}."""
    _check_same_grid(a, b)
    alpha = a.exponents.alpha if alpha is None else alpha
    mode = _resolve_pairs(pairs, a.n_steps, DYADIC_THRESHOLD)
    best = [0.0, 0.0, 0.0]
    for (dt, *la), (_, *lb) in zip(_pair_stream(a, mode), _pair_stream(b, mode)):
        for k in range(3):
            ratio = _norm(la[k] - lb[k], k + 1) / dt ** ((k + 1) * alpha)
            best[k] = max(best[k], float(np.max(ratio)))
    return float(sum(best))


def max_shuffle_defect(rp: RoughPath, sample_pairs: int = 0, seed: int = 0) -> float:
    """Shuffle defect over all cells, plus ``sample_pairs`` random reconstructed pairs."""
    worst = _max_shuffle_defect(rp.blocks)
    if sample_pairs:
        rng = np.random.default_rng(seed)
        for _ in range(sample_pairs):
            i, j = np.sort(rng.choice(rp.n_steps + 1, size=2, replace=False))
            x = chen_reconstruct(rp, float(rp.times[i]), float(rp.times[j]))
            worst = max(worst, _max_shuffle_defect(tuple(lv[None] for lv in x.levels)))  # type: ignore[arg-type]
    return worst


# ---------------------------------------------------------------------------
# Transformations
# ---------------------------------------------------------------------------


def dilate(rp: RoughPath, lam: float) -> RoughPath:
    """δ_λ X: level i scaled by λ^i; the starting point is kept."""
    _, b2, b3 = dilate_levels(rp.blocks, lam)
    path = rp.path[0] + lam * (rp.path - rp.path[0])
    return replace(rp, path=path, block2=b2, block3=b3)


def window(rp: RoughPath, i: int, j: int) -> RoughPath:
    """Restriction to grid points i..j."""
    if not 0 <= i < j <= rp.n_steps:
        raise InvalidInputError(f"window [{i}, {j}] outside 0..{rp.n_steps}")
    return replace(
        rp,
        times=rp.times[i : j + 1],
        path=rp.path[i : j + 1],
        block2=rp.block2[i:j],
        block3=rp.block3[i:j],
    )


def embed_levels(levels: Levels, offset: int, dim: int) -> Levels:
    """Place d-dimensional levels into coordinates offset..offset+d of ℝ^dim (batched)."""
    v, b2, b3 = levels
    lead = v.shape[:-1]
    sl = slice(offset, offset + v.shape[-1])
    e1 = np.zeros(lead + (dim,))
    e2 = np.zeros(lead + (dim, dim))
    e3 = np.zeros(lead + (dim, dim, dim))
    e1[..., sl] = v
    e2[..., sl, sl] = b2
    e3[..., sl, sl, sl] = b3
    return e1, e2, e3


def time_adjoined_levels(
    times: Array, levels: Levels, piecewise_linear: bool
) -> Levels:
    """
    Cell levels of (t, X), time as coordinate 0; ``levels`` may carry leading batch axes.

    Exact for piecewise-linear paths; otherwise X is translated by the time
    coordinate through ``translated_levels``.
    """
    inc = levels[0]
    h = np.broadcast_to(np.diff(times)[:, None], inc.shape[:-1] + (1,))
    if piecewise_linear:
        return segment_levels(np.concatenate([h, inc], axis=-1))
    step = np.concatenate([h, np.zeros_like(inc)], axis=-1)
    return translated_levels(embed_levels(levels, 1, inc.shape[-1] + 1), step)


def adjoin_time(rp: RoughPath) -> RoughPath:
    """The rough path (t, X) of dimension d + 1, time as coordinate 0."""
    levels = time_adjoined_levels(rp.times, rp.blocks, rp.piecewise_linear)
    path = np.concatenate([rp.times[:, None], rp.path], axis=1)
    return replace(rp, path=path, block2=levels[1], block3=levels[2])


def translated_levels(levels: Levels, shift_step: Array) -> Levels:
    """
    Cell levels of T^h X for h linear on each cell with increments ``shift_step``.

    Level 2 is X² + I[X, h] + I[h, X] + H²; level 3 is X³ + H³ plus the mixed
    terms D¹ (one X increment, two h increments), D² (h between two X
    increments), D³ = ∫ X² ⊗ dh and D⁴ = ∫ dh ⊗ X².  The symmetric part of X²
    is spread over the cell like a straight segment and its area part sits at
    the cell midpoint, so every cross integral is the one of a segment when X
    is itself piecewise linear.  The map only moves the first log coordinate
    of each cell: translations compose additively and T^{-h} undoes T^h.
    """
    x, x2, x3 = levels
    k = np.asarray(shift_step, dtype=float)
    xx = outer11(x, x)
    xk = outer11(x, k)
    kx = outer11(k, x)
    kk = outer11(k, k)
    area = x2 - xx / 2.0
    level2 = x2 + (xk + kx) / 2.0 + kk / 2.0
    d1 = (outer21(xk, k) + outer21(kx, k) + outer21(kk, x)) / 6.0
    d2 = outer21(xk, x) / 6.0
    d3 = outer21(xx, k) / 6.0 + outer21(area, k) / 2.0
    d4 = outer12(k, xx) / 6.0 + outer12(k, area) / 2.0
    level3 = x3 + d1 + d2 + d3 + d4 + outer21(kk, k) / 6.0
    return x + k, level2, level3


def translate_path(rp: RoughPath, shift: PiecewiseLinearPath) -> RoughPath:
    """
    T^h X for a piecewise-linear ``shift`` on the same grid.

    Built cell by cell from the cross integrals of ``translated_levels``; a
    geometric X stays geometric, and a piecewise-linear X moves to the lift
    of X + h.
    """
    if shift.dim != rp.dim:
        raise InvalidInputError(f"shift has dimension {shift.dim}, rough path {rp.dim}")
    if shift.times.shape != rp.times.shape or not np.allclose(shift.times, rp.times, atol=1e-14):
        raise InvalidInputError("shift and rough path live on different grids")
    _, b2, b3 = translated_levels(rp.blocks, shift.increments)
    path = rp.path + (shift.values - shift.values[0])
    return replace(rp, path=path, block2=b2, block3=b3)


def resample(rp: RoughPath, times: ArrayLike) -> RoughPath:
    """
    Move ``rp`` to a new grid.

    Coarsening onto a subset of the grid is exact (Chen products); any other
    grid uses the piecewise-linear lift of the interpolated level-1 path.
    """
    new = np.asarray(times, dtype=float)
    idx = [grid_index(rp.times, float(t)) for t in new]
    if all(i is not None for i in idx):
        ii = [int(i) for i in idx if i is not None]
        b2 = np.stack([fold_chen(rp.blocks, a, b)[1] for a, b in zip(ii[:-1], ii[1:])])
        b3 = np.stack([fold_chen(rp.blocks, a, b)[2] for a, b in zip(ii[:-1], ii[1:])])
        return replace(rp, times=new, path=rp.path[ii], block2=b2, block3=b3)
    logger.debug("resample: grid is not a subset, falling back to the piecewise-linear lift")
    return from_signature_path(
        PiecewiseLinearPath(new, rp.as_path().value_at(new)), rp.exponents
    )


# ---------------------------------------------------------------------------
# Columnar form
# ---------------------------------------------------------------------------


def to_frame(rp: RoughPath) -> pd.DataFrame:
    """One row per grid point; block columns hold the cell ending at that point (0 on row 0)."""
    d, n = rp.dim, rp.n_steps
    data: dict[str, Array] = {"t": np.asarray(rp.times)}
    for a in range(d):
        data[f"x_{a}"] = rp.path[:, a]
    pad2 = np.concatenate([np.zeros((1, d, d)), rp.block2])
    pad3 = np.concatenate([np.zeros((1, d, d, d)), rp.block3])
    for a in range(d):
        for b in range(d):
            data[f"X2_{a}_{b}"] = pad2[:, a, b]
    for a in range(d):
        for b in range(d):
            for c in range(d):
                data[f"X3_{a}_{b}_{c}"] = pad3[:, a, b, c]
    frame = pd.DataFrame(data)
    frame.attrs["n_steps"] = n
    return frame


def from_frame(frame: pd.DataFrame, exponents: HolderExponents, tol: float = 1e-9) -> RoughPath:
    cols = [c for c in frame.columns if c.startswith("x_")]
    d = len(cols)
    if d == 0:
        raise InvalidInputError("frame has no x_ columns")
    times = frame["t"].to_numpy(dtype=float)
    path = frame[[f"x_{a}" for a in range(d)]].to_numpy(dtype=float)
    n = times.shape[0] - 1
    b2 = np.empty((n, d, d))
    b3 = np.empty((n, d, d, d))
    for a in range(d):
        for b in range(d):
            b2[:, a, b] = frame[f"X2_{a}_{b}"].to_numpy(dtype=float)[1:]
            for c in range(d):
                b3[:, a, b, c] = frame[f"X3_{a}_{b}_{c}"].to_numpy(dtype=float)[1:]
    return from_blocks(times, path, b2, b3, exponents, require_geometric=False, tol=tol)


# ---------------------------------------------------------------------------
# Plain paths
# ---------------------------------------------------------------------------


def path_holder_norm(
    times: ArrayLike,
    values: ArrayLike,
    beta: float,
    pairs: PairMode | str = PairMode.AUTO,
    include_start: bool = True,
) -> Array | float:
    """
    |Y₀| + sup |Y_t − Y_s| / |t − s|^β over grid pairs.

    ``values`` is (N+1, k) or batched (B, N+1, k); the result is a float or (B,).
    """
    t = np.asarray(times, dtype=float)
    y = np.asarray(values, dtype=float)
    single = y.ndim == 2
    if single:
        y = y[None]
    n = t.shape[0] - 1
    if y.shape[1] != n + 1:
        raise InvalidInputError(f"values have {y.shape[1]} rows for {n + 1} grid points")
    mode = _resolve_pairs(pairs, n, DYADIC_THRESHOLD)
    best = np.zeros(y.shape[0])
    if mode is PairMode.ALL:
        for j in range(1, n + 1):
            diff = np.sqrt(np.sum((y[:, j : j + 1] - y[:, :j]) ** 2, axis=-1))
            best = np.maximum(best, np.max(diff / (t[j] - t[:j]) ** beta, axis=1))
    else:
        step = 1
        while step <= n:
            idx = np.arange(0, n - step + 1, step)
            diff = np.sqrt(np.sum((y[:, idx + step] - y[:, idx]) ** 2, axis=-1))
            best = np.maximum(best, np.max(diff / (t[idx + step] - t[idx]) ** beta, axis=1))
            step *= 2
    if include_start:
        best = best + np.sqrt(np.sum(y[:, 0] ** 2, axis=-1))
    return float(best[0]) if single else best


def q_variation(values: ArrayLike, q: float) -> Array | float:
    """
    Exact q-variation Σ|x_{t_{k+1}} − x_{t_k}|^q maximised over partitions
    drawn from the grid (dynamic programming).  Batched over leading axes.
    """
    x = np.asarray(values, dtype=float)
    if x.ndim == 1:
        x = x[:, None]
    single = x.ndim == 2
    if single:
        x = x[None]
    n1 = x.shape[1]
    best = np.zeros((x.shape[0], n1))
    for j in range(1, n1):
        jump = np.sum((x[:, j : j + 1] - x[:, :j]) ** 2, axis=-1) ** (q / 2.0)
        best[:, j] = np.max(best[:, :j] + jump, axis=1)
    out = best[:, -1]
    return float(out[0]) if single else out


__all__ = [
    "HolderExponents",
    "variation_exponents",
    "RoughPath",
    "from_blocks",
    "from_signature_path",
    "grid_index",
    "chen_reconstruct",
    "iter_pair_levels",
    "iter_dyadic_levels",
    "holder_norms",
    "holder_norm",
    "homogeneous_norm",
    "rp_distance",
    "max_shuffle_defect",
    "dilate",
    "window",
    "embed_levels",
    "time_adjoined_levels",
    "adjoin_time",
    "batch_holder_norms",
    "translated_levels",
    "translate_path",
    "resample",
    "to_frame",
    "from_frame",
    "path_holder_norm",
    "q_variation",
]
