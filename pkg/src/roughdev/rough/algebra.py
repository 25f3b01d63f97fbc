"""
Truncated tensor algebra T³(V) and exact signatures of piecewise-linear paths.

Elements are stored densely level by level.  The array-level helpers accept
arbitrary leading batch axes, so whole grids of segments are processed at
once; ``TruncatedTensor`` wraps a single element for the public API.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass
from typing import Optional

import numpy as np
from numpy.typing import ArrayLike, NDArray

from roughdev.core.errors import InvalidInputError

logger = logging.getLogger(__name__)

Array = NDArray[np.float64]
Levels = tuple[Array, Array, Array]


# ---------------------------------------------------------------------------
# Array-level operations (batched over leading axes)
# ---------------------------------------------------------------------------


def outer11(a: Array, b: Array) -> Array:
    return a[..., :, None] * b[..., None, :]


def outer12(a: Array, b: Array) -> Array:
    return a[..., :, None, None] * b[..., None, :, :]


def outer21(a: Array, b: Array) -> Array:
    return a[..., :, :, None] * b[..., None, None, :]


def segment_levels(v: Array) -> Levels:
    """Signature levels 1..3 of straight segments with increments ``v`` (..., d)."""
    v = np.asarray(v, dtype=float)
    l2 = outer11(v, v) / 2.0
    return v, l2, outer21(l2, v) / 3.0


def chen_levels(a: Levels, b: Levels) -> Levels:
    """Product of two group-like elements (level 0 equal to one), batched."""
    a1, a2, a3 = a
    b1, b2, b3 = b
    return (
        a1 + b1,
        a2 + outer11(a1, b1) + b2,
        a3 + outer21(a2, b1) + outer12(a1, b2) + b3,
    )


def shuffle_defects(levels: Levels) -> tuple[Array, Array]:
    """
    Per-element shuffle defects, batched.

    Level 2: max |x^p x^q - X^{pq} - X^{qp}|.
    Level 3: max |x^p X^{qr} - X^{pqr} - X^{qpr} - X^{qrp}|.
    """
    x1, x2, x3 = levels
    d2 = outer11(x1, x1) - x2 - np.swapaxes(x2, -1, -2)
    # (p, q, r) -> X^{qpr} and X^{qrp}
    x3_qpr = np.swapaxes(x3, -3, -2)
    x3_qrp = np.moveaxis(x3, -1, -3)
    d3 = outer12(x1, x2) - x3 - x3_qpr - x3_qrp
    axes2 = (-2, -1)
    axes3 = (-3, -2, -1)
    return np.max(np.abs(d2), axis=axes2), np.max(np.abs(d3), axis=axes3)


def dilate_levels(levels: Levels, lam: float) -> Levels:
    x1, x2, x3 = levels
    return lam * x1, lam**2 * x2, lam**3 * x3


def fold_chen(levels: Levels, start: int = 0, stop: Optional[int] = None) -> Levels:
    """Ordered product of consecutive blocks ``start:stop`` along axis 0."""
    x1, x2, x3 = levels
    stop = x1.shape[0] if stop is None else stop
    d = x1.shape[-1]
    acc: Levels = (np.zeros(d), np.zeros((d, d)), np.zeros((d, d, d)))
    for i in range(start, stop):
        acc = chen_levels(acc, (x1[i], x2[i], x3[i]))
    return acc


# ---------------------------------------------------------------------------
# TruncatedTensor
# ---------------------------------------------------------------------------


def _frozen(a: ArrayLike) -> Array:
    arr = np.array(a, dtype=float)
    arr.setflags(write=False)
    return arr


@dataclass(frozen=True)
class TruncatedTensor:
    """An element of T³(ℝ^d) = ℝ ⊕ ℝ^d ⊕ (ℝ^d)^⊗2 ⊕ (ℝ^d)^⊗3."""

    level0: float
    level1: Array
    level2: Array
    level3: Array

    def __post_init__(self) -> None:
        l1 = _frozen(self.level1)
        l2 = _frozen(self.level2)
        l3 = _frozen(self.level3)
        if l1.ndim != 1:
            raise InvalidInputError(f"level1 must be a vector, got shape {l1.shape}")
        d = l1.shape[0]
        if l2.shape != (d, d) or l3.shape != (d, d, d):
            raise InvalidInputError(
                f"inconsistent level shapes {l1.shape}, {l2.shape}, {l3.shape}"
            )
        object.__setattr__(self, "level0", float(self.level0))
        object.__setattr__(self, "level1", l1)
        object.__setattr__(self, "level2", l2)
        object.__setattr__(self, "level3", l3)

    @property
    def dim(self) -> int:
        return int(self.level1.shape[0])

    @property
    def levels(self) -> Levels:
        return self.level1, self.level2, self.level3

    @classmethod
    def identity(cls, dim: int) -> "TruncatedTensor":
        return cls(1.0, np.zeros(dim), np.zeros((dim, dim)), np.zeros((dim, dim, dim)))

    @classmethod
    def zero(cls, dim: int) -> "TruncatedTensor":
        return cls(0.0, np.zeros(dim), np.zeros((dim, dim)), np.zeros((dim, dim, dim)))

    @classmethod
    def group_like(cls, levels: Levels) -> "TruncatedTensor":
        return cls(1.0, *levels)

    def __mul__(self, other: "TruncatedTensor") -> "TruncatedTensor":
        return tensor_mul(self, other)

    def __add__(self, other: "TruncatedTensor") -> "TruncatedTensor":
        return tensor_add(self, other)

    def __sub__(self, other: "TruncatedTensor") -> "TruncatedTensor":
        return tensor_add(self, scale(other, -1.0))

    def max_abs(self) -> float:
        return float(
            max(
                abs(self.level0),
                np.max(np.abs(self.level1), initial=0.0),
                np.max(np.abs(self.level2), initial=0.0),
                np.max(np.abs(self.level3), initial=0.0),
            )
        )


def _check_dims(a: TruncatedTensor, b: TruncatedTensor) -> None:
    if a.dim != b.dim:
        raise InvalidInputError(f"dimension mismatch: {a.dim} vs {b.dim}")


def tensor_mul(a: TruncatedTensor, b: TruncatedTensor) -> TruncatedTensor:
    """Truncated tensor product; associative, with unit ``identity``."""
    _check_dims(a, b)
    a0, b0 = a.level0, b.level0
    return TruncatedTensor(
        a0 * b0,
        a0 * b.level1 + a.level1 * b0,
        a0 * b.level2 + outer11(a.level1, b.level1) + a.level2 * b0,
        a0 * b.level3
        + outer12(a.level1, b.level2)
        + outer21(a.level2, b.level1)
        + a.level3 * b0,
    )


def tensor_add(a: TruncatedTensor, b: TruncatedTensor) -> TruncatedTensor:
    _check_dims(a, b)
    return TruncatedTensor(
        a.level0 + b.level0,
        a.level1 + b.level1,
        a.level2 + b.level2,
        a.level3 + b.level3,
    )


def scale(a: TruncatedTensor, c: float) -> TruncatedTensor:
    return TruncatedTensor(c * a.level0, c * a.level1, c * a.level2, c * a.level3)


def dilate(a: TruncatedTensor, lam: float) -> TruncatedTensor:
    """δ_λ: level i is multiplied by λ^i."""
    return TruncatedTensor(a.level0, *dilate_levels(a.levels, lam))


def tensor_exp(x: TruncatedTensor) -> TruncatedTensor:
    """exp of an element with zero scalar part, truncated at level 3."""
    if x.level0 != 0.0:
        raise InvalidInputError("tensor_exp expects an element with level0 == 0")
    x2 = tensor_mul(x, x)
    x3 = tensor_mul(x2, x)
    one = TruncatedTensor.identity(x.dim)
    return one + x + scale(x2, 0.5) + scale(x3, 1.0 / 6.0)


def inverse(x: TruncatedTensor) -> TruncatedTensor:
    """Inverse of an element with level0 == 1: 1 - y + y² - y³ for x = 1 + y."""
    if x.level0 != 1.0:
        raise InvalidInputError("inverse is defined here for level0 == 1 only")
    y = TruncatedTensor(0.0, *x.levels)
    y2 = tensor_mul(y, y)
    y3 = tensor_mul(y2, y)
    return TruncatedTensor.identity(x.dim) - y + y2 - y3


def segment_signature(v: ArrayLike) -> TruncatedTensor:
    """exp(v) for a straight segment with increment ``v``."""
    return TruncatedTensor.group_like(segment_levels(np.asarray(v, dtype=float)))


def shuffle_defect(x: TruncatedTensor) -> float:
    """Largest shuffle-relation defect; zero for signatures of geometric paths."""
    if x.level0 != 1.0:
        raise InvalidInputError("shuffle relations need level0 == 1")
    d2, d3 = shuffle_defects(x.levels)
    return float(max(d2, d3))


# ---------------------------------------------------------------------------
# Piecewise-linear paths
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class PiecewiseLinearPath:
    """Linear interpolation of ``values`` (N+1, d) on strictly increasing ``times``."""

    times: Array
    values: Array

    def __post_init__(self) -> None:
        t = _frozen(self.times)
        v = np.array(self.values, dtype=float)
        if v.ndim == 1:
            v = v[:, None]
        v.setflags(write=False)
        if t.ndim != 1 or t.shape[0] < 2:
            raise InvalidInputError("a path needs at least two grid points")
        if v.shape[0] != t.shape[0]:
            raise InvalidInputError(
                f"{t.shape[0]} times but {v.shape[0]} values"
            )
        if np.any(np.diff(t) <= 0.0):
            raise InvalidInputError("times must be strictly increasing")
        if not (np.all(np.isfinite(t)) and np.all(np.isfinite(v))):
            raise InvalidInputError("path contains non-finite values")
        object.__setattr__(self, "times", t)
        object.__setattr__(self, "values", v)

    @property
    def dim(self) -> int:
        return int(self.values.shape[1])

    @property
    def n_segments(self) -> int:
        return int(self.times.shape[0] - 1)

    @property
    def horizon(self) -> float:
        return float(self.times[-1])

    @property
    def increments(self) -> Array:
        return np.diff(self.values, axis=0)

    def value_at(self, t: ArrayLike) -> Array:
        """Linear interpolation at time(s) ``t``; returns (..., d)."""
        t_arr = np.asarray(t, dtype=float)
        cols = [np.interp(t_arr, self.times, self.values[:, k]) for k in range(self.dim)]
        return np.stack(cols, axis=-1)

    def restrict(self, s: float, t: float) -> "PiecewiseLinearPath":
        """The same path on [s, t], with interpolated endpoints."""
        if not self.times[0] <= s < t <= self.times[-1]:
            raise InvalidInputError(
                f"[{s}, {t}] is not a subinterval of [{self.times[0]}, {self.times[-1]}]"
            )
        inner = self.times[(self.times > s) & (self.times < t)]
        grid = np.concatenate([[s], inner, [t]])
        return PiecewiseLinearPath(grid, self.value_at(grid))


def signature(
    path: PiecewiseLinearPath, s: Optional[float] = None, t: Optional[float] = None
) -> TruncatedTensor:
    """Exact truncated signature of ``path`` over [s, t] (defaults: whole span)."""
    s = float(path.times[0]) if s is None else float(s)
    t = float(path.times[-1]) if t is None else float(t)
    if s > t:
        raise InvalidInputError(f"signature needs s <= t, got s={s}, t={t}")
    if s == t:
        return TruncatedTensor.identity(path.dim)
    piece = path.restrict(s, t)
    return TruncatedTensor.group_like(fold_chen(segment_levels(piece.increments)))


__all__ = [
    "Array",
    "Levels",
    "outer11",
    "outer12",
    "outer21",
    "segment_levels",
    "chen_levels",
    "shuffle_defects",
    "dilate_levels",
    "fold_chen",
    "TruncatedTensor",
    "tensor_mul",
    "tensor_add",
    "scale",
    "dilate",
    "tensor_exp",
    "inverse",
    "segment_signature",
    "shuffle_defect",
    "PiecewiseLinearPath",
    "signature",
]
