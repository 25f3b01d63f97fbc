"""
Controlled paths (Y, Y†, Y††), composition with smooth functions, and the
third-order rough integral.

Index conventions: for a controlled path with values of shape S, Y† has
shape S + (d,) and Y†† has shape S + (d, d).  The expansions are

    Y_{s,t}  ≈ Y†_s[..., a] X¹[a] + Y††_s[..., p, q] X²[p, q]
    Y†_{s,t}[..., q] ≈ Y††_s[..., p, q] X¹[p]

so the first of the two trailing Y†† axes pairs with the earlier increment.
"""

from __future__ import annotations

import logging
from collections.abc import Callable
from dataclasses import dataclass
from typing import Optional

import numpy as np
from numpy.typing import ArrayLike
from scipy.special import zeta

from roughdev.core.errors import InvalidInputError
from roughdev.core.scenario import RemainderVariant
from roughdev.rough.algebra import Array
from roughdev.rough.roughpath import RoughPath, holder_norms, iter_pair_levels

logger = logging.getLogger(__name__)

Derivative = Callable[[Array], Array]

_FD_STEPS = (1e-5, 1e-4, 1e-3, 5e-3)


# ---------------------------------------------------------------------------
# Smooth functions with four derivatives
# ---------------------------------------------------------------------------


def central_difference(fn: Derivative, z: Array, step: float) -> Array:
    """∂fn/∂z by central differences; appends one input axis to fn's output."""
    z = np.asarray(z, dtype=float)
    w = z.shape[-1]
    cols = []
    for i in range(w):
        e = np.zeros(w)
        e[i] = step
        cols.append((fn(z + e) - fn(z - e)) / (2.0 * step))
    return np.stack(cols, axis=-1)


@dataclass(frozen=True)
class SmoothFunction4:
    """
    A C⁴ map ℝ^in_dim → ℝ^out_shape with derivative callables.

    Every callable is batch-aware: an input of shape (..., in_dim) yields
    (..., *out_shape) for the value and (..., *out_shape, in_dim, ..., in_dim)
    for the k-th derivative.
    """

    in_dim: int
    out_shape: tuple[int, ...]
    value: Derivative
    grad: Derivative
    hess: Derivative
    third: Derivative
    fourth: Derivative
    name: str = "function"
    bound: Optional[float] = None  # Σ_k sup |∇^k φ|, when known
    lipschitz: Optional[float] = None
    exact: bool = True

    def __call__(self, z: ArrayLike) -> Array:
        return self.value(np.asarray(z, dtype=float))

    def derivative(self, order: int, z: ArrayLike) -> Array:
        fns = (self.value, self.grad, self.hess, self.third, self.fourth)
        if not 0 <= order <= 4:
            raise InvalidInputError(f"derivative order must be 0..4, got {order}")
        return fns[order](np.asarray(z, dtype=float))

    def _sample(self, center: ArrayLike, radius: float, n: int, seed: int) -> Array:
        rng = np.random.default_rng(seed)
        c = np.broadcast_to(np.asarray(center, dtype=float), (self.in_dim,))
        return c + radius * rng.uniform(-1.0, 1.0, size=(n, self.in_dim))

    def estimate_bound(
        self, center: ArrayLike = 0.0, radius: float = 1.0, n: int = 64, seed: int = 0
    ) -> float:
        """‖φ‖_{C⁴_b}: the recorded bound, or a sample estimate on a box around ``center``."""
        if self.bound is not None:
            return self.bound
        pts = self._sample(center, radius, n, seed)
        total = 0.0
        for k in range(5):
            vals = self.derivative(k, pts).reshape(n, -1)
            total += float(np.max(np.sqrt(np.sum(vals**2, axis=1))))
        return total

    def estimate_lipschitz(
        self, center: ArrayLike = 0.0, radius: float = 1.0, n: int = 64, seed: int = 0
    ) -> float:
        if self.lipschitz is not None:
            return self.lipschitz
        pts = self._sample(center, radius, n, seed)
        g = self.grad(pts).reshape(n, -1, self.in_dim)
        return float(np.max(np.linalg.norm(g, ord=2, axis=(1, 2))))


def _zeros_fn(shape: tuple[int, ...]) -> Derivative:
    def fn(z: Array) -> Array:
        return np.zeros(np.shape(z)[:-1] + shape)

    return fn


def constant(value: ArrayLike, in_dim: int, name: str = "constant") -> SmoothFunction4:
    c = np.asarray(value, dtype=float)
    out = tuple(c.shape)

    def fn(z: Array) -> Array:
        return np.broadcast_to(c, np.shape(z)[:-1] + out).copy()

    w = (in_dim,)
    return SmoothFunction4(
        in_dim,
        out,
        fn,
        _zeros_fn(out + w),
        _zeros_fn(out + w * 2),
        _zeros_fn(out + w * 3),
        _zeros_fn(out + w * 4),
        name=name,
        bound=float(np.linalg.norm(c)),
        lipschitz=0.0,
    )


def linear(
    matrix: ArrayLike, offset: Optional[ArrayLike] = None, name: str = "linear"
) -> SmoothFunction4:
    """z ↦ M z + b, with M of shape out_shape + (in_dim,)."""
    m = np.asarray(matrix, dtype=float)
    if m.ndim < 2:
        raise InvalidInputError(f"linear map needs a matrix, got shape {m.shape}")
    out, in_dim = tuple(m.shape[:-1]), int(m.shape[-1])
    b = np.zeros(out) if offset is None else np.broadcast_to(np.asarray(offset, float), out)

    flat = m.reshape(-1, in_dim)

    def fn(z: Array) -> Array:
        return (z @ flat.T).reshape(np.shape(z)[:-1] + out) + b

    def grad(z: Array) -> Array:
        return np.broadcast_to(m, np.shape(z)[:-1] + m.shape).copy()

    w = (in_dim,)
    lip = float(np.linalg.norm(m.reshape(-1, in_dim), ord=2))
    return SmoothFunction4(
        in_dim,
        out,
        fn,
        grad,
        _zeros_fn(out + w * 2),
        _zeros_fn(out + w * 3),
        _zeros_fn(out + w * 4),
        name=name,
        lipschitz=lip,
    )


def identity(dim: int) -> SmoothFunction4:
    return linear(np.eye(dim), name="identity")


def finite_difference(
    fn: Derivative,
    in_dim: int,
    out_shape: tuple[int, ...],
    name: str = "finite-difference",
    scale: float = 1.0,
) -> SmoothFunction4:
    """
    Wrap a plain batch-aware callable; derivatives come from nested central
    differences and are markedly less accurate than analytic ones.
    """
    logger.warning("%s: derivatives by finite differences (lower accuracy)", name)
    h1, h2, h3, h4 = (scale * s for s in _FD_STEPS)

    def grad(z: Array) -> Array:
        return central_difference(fn, z, h1)

    def hess(z: Array) -> Array:
        return central_difference(grad, z, h2)

    def third(z: Array) -> Array:
        return central_difference(hess, z, h3)

    def fourth(z: Array) -> Array:
        return central_difference(third, z, h4)

    return SmoothFunction4(
        in_dim, tuple(out_shape), fn, grad, hess, third, fourth, name=name, exact=False
    )


def check_derivatives(
    fn: SmoothFunction4, points: ArrayLike, step: float = 1e-5
) -> dict[int, float]:
    """Relative mismatch of each analytic derivative against differences of the previous one."""
    pts = np.atleast_2d(np.asarray(points, dtype=float))
    report: dict[int, float] = {}
    for k in range(1, 5):
        analytic = fn.derivative(k, pts)
        lower = (fn.value, fn.grad, fn.hess, fn.third)[k - 1]
        numeric = central_difference(lower, pts, step)
        scale = max(1.0, float(np.max(np.abs(numeric))))
        report[k] = float(np.max(np.abs(analytic - numeric))) / scale
    return report


# ---------------------------------------------------------------------------
# Controlled paths
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class ControlledPath:
    """(Y, Y†, Y††) on the grid of ``reference``."""

    reference: RoughPath
    y: Array
    y_dag: Array
    y_ddag: Array

    def __post_init__(self) -> None:
        n1, d = self.reference.n_steps + 1, self.reference.dim
        y = np.asarray(self.y, dtype=float)
        yd = np.asarray(self.y_dag, dtype=float)
        ydd = np.asarray(self.y_ddag, dtype=float)
        if y.shape[0] != n1:
            raise InvalidInputError(f"Y has {y.shape[0]} rows for {n1} grid points")
        shape = y.shape[1:]
        if yd.shape != (n1, *shape, d) or ydd.shape != (n1, *shape, d, d):
            raise InvalidInputError(
                f"Gubinelli derivatives {yd.shape}, {ydd.shape} do not match "
                f"values {y.shape} and driver dimension {d}"
            )
        object.__setattr__(self, "y", y)
        object.__setattr__(self, "y_dag", yd)
        object.__setattr__(self, "y_ddag", ydd)

    @property
    def value_shape(self) -> tuple[int, ...]:
        return tuple(self.y.shape[1:])

    @property
    def times(self) -> Array:
        return self.reference.times


@dataclass(frozen=True)
class RemainderReport:
    """Remainders on consecutive cells and their Hölder norms over all grid pairs."""

    sharp: Array  # (N, *S)
    sharpsharp: Array  # (N, *S, d)
    norm_sharp: float  # ‖Y♯‖_3α
    norm_sharpsharp: float  # ‖Y♯♯‖_2α
    ddag_holder: float  # ‖Y††‖_α
    controlled_norm: float


def _frob(a: Array, lead: int = 1) -> Array:
    return np.sqrt(np.sum(a.reshape(a.shape[:lead] + (-1,)) ** 2, axis=-1))


def _contract1(coef: Array, x1: Array) -> Array:
    return np.einsum("i...a,ia->i...", coef, x1)


def _contract2(coef: Array, x2: Array) -> Array:
    return np.einsum("i...pq,ipq->i...", coef, x2)


def _contract_first(coef: Array, x1: Array) -> Array:
    return np.einsum("i...pq,ip->i...q", coef, x1)


def remainders(
    cp: ControlledPath,
    variant: RemainderVariant | str = RemainderVariant.LEFT,
    alpha: Optional[float] = None,
) -> RemainderReport:
    """
    Y♯_{s,t} = Y_{s,t} − Y†_s X¹ − Y††_s X²  and  Y♯♯_{s,t} = Y†_{s,t} − Y††_s X¹.

    ``variant="right"`` evaluates Y†† at t instead of s in both remainders.
    """
    variant = RemainderVariant(variant)
    rp = cp.reference
    alpha = rp.exponents.alpha if alpha is None else alpha
    y, yd, ydd = cp.y, cp.y_dag, cp.y_ddag
    n = rp.n_steps
    sharp_cells = np.zeros((n, *cp.value_shape))
    ss_cells = np.zeros((n, *cp.value_shape, rp.dim))
    best = [0.0, 0.0, 0.0]
    for j, x1, x2, _ in iter_pair_levels(rp):
        dt = rp.times[j] - rp.times[:j]
        dd = ydd[:j] if variant is RemainderVariant.LEFT else np.broadcast_to(ydd[j], ydd[:j].shape)
        sharp = (y[j] - y[:j]) - _contract1(yd[:j], x1) - _contract2(dd, x2)
        ss = (yd[j] - yd[:j]) - _contract_first(dd, x1)
        sharp_cells[j - 1] = sharp[-1]
        ss_cells[j - 1] = ss[-1]
        best[0] = max(best[0], float(np.max(_frob(sharp) / dt ** (3 * alpha))))
        best[1] = max(best[1], float(np.max(_frob(ss) / dt ** (2 * alpha))))
        best[2] = max(best[2], float(np.max(_frob(ydd[j] - ydd[:j]) / dt**alpha)))
    controlled = (
        float(np.linalg.norm(yd[0]))
        + float(np.linalg.norm(ydd[0]))
        + best[2]
        + best[1]
        + best[0]
    )
    return RemainderReport(sharp_cells, ss_cells, best[0], best[1], best[2], controlled)


def compose(phi: SmoothFunction4, cp: ControlledPath) -> ControlledPath:
    """
    Φ(Y) as a controlled path:
    Z† = ∇Φ Y†,  Z††[.., p, q] = ∇Φ Y††[.., p, q] + ∇²Φ(Y†[., p], Y†[., q]).
    """
    if cp.y.ndim != 2 or cp.y.shape[1] != phi.in_dim:
        raise InvalidInputError(
            f"compose needs vector values of dimension {phi.in_dim}, got {cp.value_shape}"
        )
    g = phi.grad(cp.y)
    h = phi.hess(cp.y)
    z = phi.value(cp.y)
    zd = np.einsum("n...u,nup->n...p", g, cp.y_dag)
    zdd = np.einsum("n...u,nupq->n...pq", g, cp.y_ddag) + np.einsum(
        "n...uv,nup,nvq->n...pq", h, cp.y_dag, cp.y_dag
    )
    return ControlledPath(cp.reference, z, zd, zdd)


def composition_ratio(phi: SmoothFunction4, cp: ControlledPath) -> float:
    """Controlled norm of Φ(Y) relative to (1 + controlled norm of Y)²."""
    before = remainders(cp).controlled_norm
    after = remainders(compose(phi, cp)).controlled_norm
    return after / (1.0 + before) ** 2


# ---------------------------------------------------------------------------
# Rough integral
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class SewingDiagnostics:
    """Local errors |I_{s,t} − Ξ_{s,t}| against the sewing bound over all grid pairs."""

    max_error: float
    constant: float
    max_ratio: float
    fraction_within: float
    n_pairs: int


def _local(y: Array, yd: Array, ydd: Array, x1: Array, x2: Array, x3: Array) -> Array:
    """Ξ = Y X¹ + Y† X² + Y†† X³ with the integration direction contracted last."""
    return (
        np.einsum("i...a,ia->i...", y, x1)
        + np.einsum("i...ab,iba->i...", yd, x2)
        + np.einsum("i...abc,ibca->i...", ydd, x3)
    )


def _same_reference(a: RoughPath, b: RoughPath) -> bool:
    if a is b:
        return True
    return (
        a.times.shape == b.times.shape
        and a.dim == b.dim
        and np.allclose(a.times, b.times, atol=1e-14)
        and np.allclose(a.path, b.path)
        and np.allclose(a.block2, b.block2)
        and np.allclose(a.block3, b.block3)
    )


def rough_integral(
    cp: ControlledPath,
    rp: Optional[RoughPath] = None,
    z0: Optional[ArrayLike] = None,
    diagnostics: bool = False,
) -> tuple[ControlledPath, Optional[SewingDiagnostics]]:
    """
    Z = ∫ Y dX for an L(ℝ^d, W)-valued controlled path Y (last value axis = d).

    Returns Z with Z† = Y and Z†† = Y† with its trailing axes swapped.
    """
    rp = cp.reference if rp is None else rp
    if not _same_reference(cp.reference, rp):
        raise InvalidInputError("integrand is not controlled by the given rough path")
    if not cp.value_shape or cp.value_shape[-1] != rp.dim:
        raise InvalidInputError(
            f"integrand values {cp.value_shape} must end with the driver dimension {rp.dim}"
        )
    x1, x2, x3 = rp.blocks
    xi = _local(cp.y[:-1], cp.y_dag[:-1], cp.y_ddag[:-1], x1, x2, x3)
    out_shape = cp.value_shape[:-1]
    start = np.zeros(out_shape) if z0 is None else np.broadcast_to(np.asarray(z0, float), out_shape)
    z = start + np.concatenate([np.zeros((1, *out_shape)), np.cumsum(xi, axis=0)])
    result = ControlledPath(rp, z, cp.y, np.swapaxes(cp.y_dag, -1, -2))
    if not diagnostics:
        return result, None
    return result, sewing_diagnostics(cp, result)


def sewing_diagnostics(integrand: ControlledPath, integral: ControlledPath) -> SewingDiagnostics:
    """
    Compare I_{s,t} − Ξ_{s,t} on every grid pair with
    2^{4α} ζ(4α) |t−s|^{4α} (‖Y♯‖‖X¹‖ + ‖Y♯♯‖‖X²‖ + ‖Y††‖‖X³‖).
    """
    rp = integrand.reference
    alpha = rp.exponents.alpha
    rem = remainders(integrand, alpha=alpha)
    n1, n2, n3 = holder_norms(rp, alpha=alpha, pairs="all")
    const = rem.norm_sharp * n1 + rem.norm_sharpsharp * n2 + rem.ddag_holder * n3
    prefactor = 2.0 ** (4 * alpha) * float(zeta(4 * alpha))
    y, yd, ydd, z = integrand.y, integrand.y_dag, integrand.y_ddag, integral.y
    slack = 1e-12 * max(1.0, float(np.max(np.abs(z))))
    max_err = max_ratio = 0.0
    within = total = 0
    for j, s1, s2, s3 in iter_pair_levels(rp):
        dt = rp.times[j] - rp.times[:j]
        err = _frob((z[j] - z[:j]) - _local(y[:j], yd[:j], ydd[:j], s1, s2, s3))
        bound = prefactor * const * dt ** (4 * alpha)
        max_err = max(max_err, float(np.max(err)))
        within += int(np.sum(err <= bound + slack))
        total += err.shape[0]
        with np.errstate(divide="ignore", invalid="ignore"):
            ratio = np.where(bound > 0, err / np.where(bound > 0, bound, 1.0), 0.0)
        max_ratio = max(max_ratio, float(np.max(ratio)))
    return SewingDiagnostics(max_err, const, max_ratio, within / max(total, 1), total)


__all__ = [
    "Derivative",
    "central_difference",
    "SmoothFunction4",
    "constant",
    "linear",
    "identity",
    "finite_difference",
    "check_derivatives",
    "ControlledPath",
    "RemainderReport",
    "remainders",
    "compose",
    "composition_ratio",
    "SewingDiagnostics",
    "rough_integral",
    "sewing_diagnostics",
]
