"""
Cameron–Martin controls for the pair (b^H, w).

A control is a pair (ĥ, v′) of piecewise-constant functions on cells of
[0, T].  The fBM component is u = K_H ĥ with the Molchan–Volterra kernel
(or, with ``kernel="discrete"``, the Cholesky factor of R_H on the cell
breakpoints), the BM component is v = ∫ v′.  The control cost is
½(‖ĥ‖²_{L²} + ‖v′‖²_{L²}).
"""

from __future__ import annotations

import logging
from collections.abc import Sequence
from dataclasses import dataclass, replace
from functools import lru_cache
from typing import Optional

import numpy as np
import pandas as pd
from numpy.typing import ArrayLike
from scipy import integrate, linalg
from scipy.special import beta as beta_fn
from scipy.special import betainc

from roughdev.core.errors import CovarianceError, InvalidInputError, InvariantError
from roughdev.core.scenario import CellLayout, KernelKind
from roughdev.gaussian.sampling import fbm_covariance
from roughdev.rough.algebra import Array, PiecewiseLinearPath
from roughdev.rough.roughpath import (
    HolderExponents,
    RoughPath,
    from_signature_path,
    max_shuffle_defect,
    rp_distance,
    translate_path,
)

logger = logging.getLogger(__name__)


# ---------------------------------------------------------------------------
# Kernel
# ---------------------------------------------------------------------------


def molchan_constant(hurst: float) -> float:
    """c_H = sqrt(2H / ((1 − 2H) B(1 − 2H, H + 1/2))) for H < 1/2."""
    return float(np.sqrt(2.0 * hurst / ((1.0 - 2.0 * hurst) * beta_fn(1.0 - 2.0 * hurst, hurst + 0.5))))


def molchan_kernel(t: ArrayLike, s: ArrayLike, hurst: float) -> Array:
    """
    K_H(t, s) for 0 < s < t, zero elsewhere (H ≤ 1/2).

    K_H(t,s) = c_H [ (t/s)^{H−1/2} (t−s)^{H−1/2}
                     + (1/2 − H) s^{H−1/2} B(1−2H, H+1/2) (1 − I_{s/t}(1−2H, H+1/2)) ]
    """
    t_arr = np.asarray(t, dtype=float)
    s_arr = np.asarray(s, dtype=float)
    inside = (s_arr > 0.0) & (s_arr < t_arr)
    if hurst == 0.5:
        return np.where(inside, 1.0, 0.0)
    if not 0.0 < hurst < 0.5:
        raise InvalidInputError(f"the Volterra kernel is implemented for H <= 1/2, got {hurst}")
    a, b = 1.0 - 2.0 * hurst, hurst + 0.5
    e = hurst - 0.5
    tt = np.where(inside, t_arr, 2.0)
    ss = np.where(inside, s_arr, 1.0)
    first = (tt / ss) ** e * (tt - ss) ** e
    second = (0.5 - hurst) * ss**e * beta_fn(a, b) * (1.0 - betainc(a, b, ss / tt))
    return np.where(inside, molchan_constant(hurst) * (first + second), 0.0)


@lru_cache(maxsize=32)
def _volterra_cell_integrals(
    hurst: float, times: tuple[float, ...], edges: tuple[float, ...]
) -> Array:
    """A[i, k] = ∫_{cell k ∩ [0, t_i]} K_H(t_i, s) ds by adaptive quadrature."""
    t = np.asarray(times)
    e = np.asarray(edges)
    out = np.zeros((t.shape[0], e.shape[0] - 1))
    for i, ti in enumerate(t):
        for k in range(e.shape[0] - 1):
            lo, hi = e[k], min(e[k + 1], ti)
            if hi <= lo:
                break
            val, _ = integrate.quad(lambda s: float(molchan_kernel(ti, s, hurst)), lo, hi, limit=200)
            out[i, k] = val
    out.setflags(write=False)
    return out


def _interp_matrix(times: Array, nodes: Array) -> Array:
    """P with (P y)(t_i) = linear interpolation of nodal values y at t_i."""
    eye = np.eye(nodes.shape[0])
    return np.stack([np.interp(times, nodes, eye[j]) for j in range(nodes.shape[0])], axis=1)


def _discrete_matrix(hurst: float, times: Array, edges: Array) -> Array:
    nodes = edges[1:]
    cov = fbm_covariance(nodes[:, None], nodes[None, :], hurst)
    try:
        chol = linalg.cholesky(cov, lower=True)
    except linalg.LinAlgError as exc:
        raise CovarianceError("covariance on the control breakpoints is not positive definite") from exc
    lengths = np.diff(edges)
    interp = _interp_matrix(times, edges)[:, 1:]
    # ĥ_k √|cell k| are the standard coordinates, so ½‖ĥ‖² matches the covariance
    return interp @ (chol * np.sqrt(lengths)[None, :])


def cell_edges(horizon: float, n_cells: int, layout: CellLayout | str = CellLayout.GRADED) -> Array:
    """Control breakpoints; ``graded`` refines cells towards both endpoints."""
    k = np.arange(n_cells + 1, dtype=float)
    if CellLayout(layout) is CellLayout.UNIFORM:
        return horizon * k / n_cells
    edges = 0.5 * horizon * (1.0 - np.cos(np.pi * k / n_cells))
    edges[0], edges[-1] = 0.0, horizon
    return edges


# ---------------------------------------------------------------------------
# Basis and controls
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class CameronMartinBasis:
    """Maps cell coefficients to (u, v) values on the time grid."""

    hurst: float
    times: Array
    edges: Array
    dim_fbm: int
    dim_bm: int
    kernel: KernelKind
    fbm_matrix: Array  # (N+1, M)
    bm_matrix: Array  # (N+1, M)

    @classmethod
    def from_edges(
        cls,
        hurst: float,
        times: ArrayLike,
        edges: ArrayLike,
        dim_fbm: int,
        dim_bm: int = 0,
        kernel: KernelKind | str = KernelKind.VOLTERRA,
    ) -> "CameronMartinBasis":
        t = np.asarray(times, dtype=float)
        e = np.asarray(edges, dtype=float)
        if e[0] != t[0] or abs(e[-1] - t[-1]) > 1e-12 or np.any(np.diff(e) <= 0):
            raise InvalidInputError("cell edges must increase and span the time grid")
        kind = KernelKind(kernel)
        if kind is KernelKind.VOLTERRA:
            a = np.array(_volterra_cell_integrals(hurst, tuple(t), tuple(e)))
        else:
            a = _discrete_matrix(hurst, t, e)
        lengths = np.diff(e)
        bm = np.clip(t[:, None] - e[None, :-1], 0.0, lengths[None, :])
        return cls(hurst, t, e, dim_fbm, dim_bm, kind, a, bm)

    @classmethod
    def build(
        cls,
        hurst: float,
        times: ArrayLike,
        n_cells: int,
        dim_fbm: int,
        dim_bm: int = 0,
        kernel: KernelKind | str = KernelKind.VOLTERRA,
        layout: CellLayout | str = CellLayout.GRADED,
    ) -> "CameronMartinBasis":
        t = np.asarray(times, dtype=float)
        return cls.from_edges(hurst, t, cell_edges(float(t[-1]), n_cells, layout), dim_fbm, dim_bm, kernel)

    @property
    def n_cells(self) -> int:
        return int(self.edges.shape[0] - 1)

    @property
    def cell_lengths(self) -> Array:
        return np.diff(self.edges)

    @property
    def n_params(self) -> int:
        return self.n_cells * (self.dim_fbm + self.dim_bm)

    def refined(self, factor: int) -> "CameronMartinBasis":
        """Split every cell into ``factor`` equal pieces."""
        pieces = [np.linspace(a, b, factor + 1)[:-1] for a, b in zip(self.edges[:-1], self.edges[1:])]
        edges = np.concatenate(pieces + [self.edges[-1:]])
        return CameronMartinBasis.from_edges(
            self.hurst, self.times, edges, self.dim_fbm, self.dim_bm, self.kernel
        )


@dataclass(frozen=True)
class CameronMartinControl:
    basis: CameronMartinBasis
    hhat: Array  # (M, d)
    vprime: Array  # (M, e)

    def __post_init__(self) -> None:
        m = self.basis.n_cells
        h = np.asarray(self.hhat, dtype=float).reshape(m, self.basis.dim_fbm)
        v = np.asarray(self.vprime, dtype=float).reshape(m, self.basis.dim_bm)
        object.__setattr__(self, "hhat", h)
        object.__setattr__(self, "vprime", v)

    @classmethod
    def zeros(cls, basis: CameronMartinBasis) -> "CameronMartinControl":
        return cls(basis, np.zeros((basis.n_cells, basis.dim_fbm)), np.zeros((basis.n_cells, basis.dim_bm)))

    @classmethod
    def from_vector(cls, basis: CameronMartinBasis, theta: ArrayLike) -> "CameronMartinControl":
        vec = np.asarray(theta, dtype=float)
        if vec.shape != (basis.n_params,):
            raise InvalidInputError(f"expected {basis.n_params} parameters, got {vec.shape}")
        split = basis.n_cells * basis.dim_fbm
        return cls(basis, vec[:split], vec[split:])

    def to_vector(self) -> Array:
        return np.concatenate([self.hhat.ravel(), self.vprime.ravel()])

    @property
    def half_norm_sq(self) -> float:
        """½(‖ĥ‖² + ‖v′‖²) in L²([0, T])."""
        w = self.basis.cell_lengths[:, None]
        return 0.5 * float(np.sum(self.hhat**2 * w) + np.sum(self.vprime**2 * w))

    def scaled(self, c: float) -> "CameronMartinControl":
        return replace(self, hhat=c * self.hhat, vprime=c * self.vprime)

    def refined(self, factor: int) -> "CameronMartinControl":
        """The same functions on a basis with ``factor`` times more cells."""
        basis = self.basis.refined(factor)
        return CameronMartinControl(
            basis, np.repeat(self.hhat, factor, axis=0), np.repeat(self.vprime, factor, axis=0)
        )

    def u_values(self) -> Array:
        return self.basis.fbm_matrix @ self.hhat

    def v_values(self) -> Array:
        return self.basis.bm_matrix @ self.vprime

    def vprime_at(self, t: ArrayLike) -> Array:
        """v′(t), piecewise constant and right-continuous on the cells."""
        idx = np.searchsorted(self.basis.edges, np.asarray(t, dtype=float), side="right") - 1
        idx = np.clip(idx, 0, self.basis.n_cells - 1)
        return self.vprime[idx]


def cm_to_path(ctrl: CameronMartinControl, fbm_only: bool = False) -> PiecewiseLinearPath:
    """(u, v) on the basis grid as a piecewise-linear path."""
    values = ctrl.u_values() if fbm_only else np.concatenate([ctrl.u_values(), ctrl.v_values()], axis=1)
    return PiecewiseLinearPath(ctrl.basis.times, values)


def cm_lift(ctrl: CameronMartinControl, exponents: HolderExponents) -> RoughPath:
    return from_signature_path(cm_to_path(ctrl), exponents)


def translate(
    lift: RoughPath, ctrl: CameronMartinControl, scale: float = 1.0, tol: float = 1e-9
) -> RoughPath:
    """
    T^{scale·(u,v)} X.  A lift of the fBM alone is shifted by u only; a joint
    lift of (b^H, w) by (u, v).
    """
    d, e = ctrl.basis.dim_fbm, ctrl.basis.dim_bm
    if lift.dim == d:
        path = cm_to_path(ctrl, fbm_only=True)
    elif lift.dim == d + e:
        path = cm_to_path(ctrl)
    else:
        raise InvalidInputError(
            f"lift of dimension {lift.dim} matches neither {d} nor {d + e} control components"
        )
    shift = PiecewiseLinearPath(path.times, scale * path.values)
    out = translate_path(lift, shift)
    defect = max_shuffle_defect(out)
    if defect > tol:
        raise InvariantError(f"translated path has shuffle defect {defect:.3e}", defect=defect)
    return out


# ---------------------------------------------------------------------------
# Oracles and approximation studies
# ---------------------------------------------------------------------------


def terminal_value_oracle(
    basis: CameronMartinBasis, level: float, component: int = 0
) -> tuple[float, CameronMartinControl]:
    """
    min ½‖ĥ‖² subject to u_T[component] = level, solved exactly on the basis:
    the minimiser is proportional to A[N, k] / |cell k|.
    """
    row = basis.fbm_matrix[-1]
    weights = row**2 / basis.cell_lengths
    total = float(np.sum(weights))
    if total <= 0.0:
        raise InvalidInputError("the basis cannot reach the terminal level")
    hhat = np.zeros((basis.n_cells, basis.dim_fbm))
    hhat[:, component] = level * (row / basis.cell_lengths) / total
    ctrl = CameronMartinControl(basis, hhat, np.zeros((basis.n_cells, basis.dim_bm)))
    return level**2 / (2.0 * total), ctrl


def dyadic_approximation(path: PiecewiseLinearPath, level: int) -> PiecewiseLinearPath:
    """Interpolate ``path`` linearly between the dyadic points k 2^{-level} T, on its own grid."""
    t0, t1 = float(path.times[0]), float(path.times[-1])
    nodes = np.linspace(t0, t1, 2**level + 1)
    node_values = path.value_at(nodes)
    cols = [np.interp(path.times, nodes, node_values[:, k]) for k in range(path.dim)]
    return PiecewiseLinearPath(path.times, np.stack(cols, axis=1))


def dyadic_convergence(
    ctrl: CameronMartinControl,
    exponents: HolderExponents,
    levels: Sequence[int] = (4, 5, 6, 7, 8),
    alpha: Optional[float] = None,
) -> pd.DataFrame:
    """Rough-path distance between the lift of (u, v) and lifts of its dyadic approximations."""
    target_path = cm_to_path(ctrl)
    target = from_signature_path(target_path, exponents)
    rows = []
    for m in levels:
        approx = from_signature_path(dyadic_approximation(target_path, m), exponents)
        rows.append({"level": m, "distance": rp_distance(approx, target, alpha=alpha)})
    return pd.DataFrame(rows)


__all__ = [
    "molchan_constant",
    "molchan_kernel",
    "cell_edges",
    "CameronMartinBasis",
    "CameronMartinControl",
    "cm_to_path",
    "cm_lift",
    "translate",
    "terminal_value_oracle",
    "dyadic_approximation",
    "dyadic_convergence",
]
