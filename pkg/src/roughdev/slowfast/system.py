"""
The slow-fast system

    dX = f(X, Y) dt + √ε σ(X) dB^H
    dY = δ⁻¹ F(X, Y) dt + δ^{-1/2} G(X, Y) dW

with coefficients from the palette, the Itô–Stratonovich correction of the
fast drift and sampled checks of the dissipativity conditions.
"""

from __future__ import annotations

import logging
from collections.abc import Callable
from dataclasses import dataclass, replace
from typing import Optional

import numpy as np
from numpy.typing import ArrayLike

from roughdev.core import DevlabConfig
from roughdev.core.errors import InvalidInputError
from roughdev.rough.algebra import Array
from roughdev.rough.controlled import SmoothFunction4
from roughdev.slowfast.palette import build_coefficient

logger = logging.getLogger(__name__)

Field = Callable[[Array], Array]


@dataclass(frozen=True)
class AssumptionParams:
    """Recorded constants: Lipschitz L, dissipativity β₁, β₂ and the growth constant C."""

    lipschitz: float = 1.0
    beta1: float = 1.0
    beta2: float = 1.0
    growth_c: float = 1.0


def ito_correction(F: SmoothFunction4, G: SmoothFunction4, slow_dim: int) -> Field:
    """
    F̃ᵏ(x, y) = Fᵏ(x, y) + ½ Σᵢⱼ ∂G^{kj}/∂yᵢ · G^{ij}(x, y), on z = (x, y).

    A G whose y-derivative vanishes returns F itself.
    """
    if len(G.out_shape) != 2 or G.out_shape[0] != F.out_shape[0]:
        raise InvalidInputError(f"G has shape {G.out_shape}, F has shape {F.out_shape}")

    def corrected(z: Array) -> Array:
        z = np.asarray(z, dtype=float)
        dg = G.grad(z)[..., slow_dim:]  # [k, j, i] = ∂G^{kj}/∂y_i
        return F.value(z) + 0.5 * np.einsum("...kji,...ij->...k", dg, G.value(z))

    if G.lipschitz == 0.0:
        return F.value
    return corrected


@dataclass(frozen=True)
class SlowFastSpec:
    f: SmoothFunction4  # ℝ^{m+n} → ℝ^m
    sigma: SmoothFunction4  # ℝ^m → ℝ^{m×d}
    F: SmoothFunction4  # ℝ^{m+n} → ℝ^n
    G: SmoothFunction4  # ℝ^{m+n} → ℝ^{n×e}
    eps: float
    delta: float
    hurst: float
    x0: Array
    y0: Array
    assumptions: AssumptionParams = AssumptionParams()
    bar_f: Optional[SmoothFunction4] = None  # closed form of the averaged drift, when known

    def __post_init__(self) -> None:
        x0 = np.atleast_1d(np.asarray(self.x0, dtype=float))
        y0 = np.atleast_1d(np.asarray(self.y0, dtype=float))
        object.__setattr__(self, "x0", x0)
        object.__setattr__(self, "y0", y0)
        m, n = x0.shape[0], y0.shape[0]
        if self.f.in_dim != m + n or self.f.out_shape != (m,):
            raise InvalidInputError(f"f must map R^{m + n} to R^{m}")
        if self.sigma.in_dim != m or len(self.sigma.out_shape) != 2 or self.sigma.out_shape[0] != m:
            raise InvalidInputError(f"sigma must map R^{m} to {m} x d matrices")
        if self.F.in_dim != m + n or self.F.out_shape != (n,):
            raise InvalidInputError(f"F must map R^{m + n} to R^{n}")
        if self.G.in_dim != m + n or len(self.G.out_shape) != 2 or self.G.out_shape[0] != n:
            raise InvalidInputError(f"G must map R^{m + n} to {n} x e matrices")
        if self.bar_f is not None and (self.bar_f.in_dim != m or self.bar_f.out_shape != (m,)):
            raise InvalidInputError(f"bar_f must map R^{m} to R^{m}")
        if not 0.0 < self.delta <= 1.0 or not 0.0 < self.eps <= 1.0:
            raise InvalidInputError("eps and delta must lie in (0, 1]")
        if self.delta >= self.eps:
            logger.warning(
                "delta=%.3g is not small against eps=%.3g; averaging needs delta = o(eps)",
                self.delta,
                self.eps,
            )

    @property
    def m(self) -> int:
        return int(self.x0.shape[0])

    @property
    def n(self) -> int:
        return int(self.y0.shape[0])

    @property
    def d(self) -> int:
        return int(self.sigma.out_shape[1])

    @property
    def e(self) -> int:
        return int(self.G.out_shape[1])

    @property
    def scale_ratio(self) -> float:
        """δ/ε; the averaging regime needs this to vanish."""
        return self.delta / self.eps

    def corrected_drift(self) -> Field:
        return ito_correction(self.F, self.G, self.m)

    def joint(self, x: ArrayLike, y: ArrayLike) -> Array:
        """z = (x, y), broadcasting a single x against a batch of y."""
        x_arr = np.asarray(x, dtype=float)
        y_arr = np.asarray(y, dtype=float)
        lead = np.broadcast_shapes(x_arr.shape[:-1], y_arr.shape[:-1])
        return np.concatenate(
            [np.broadcast_to(x_arr, lead + (self.m,)), np.broadcast_to(y_arr, lead + (self.n,))],
            axis=-1,
        )

    def with_scales(self, eps: float, delta: float) -> "SlowFastSpec":
        return replace(self, eps=eps, delta=delta)

    @classmethod
    def from_config(cls, config: DevlabConfig) -> "SlowFastSpec":
        sf = config.slow_fast
        m, n = len(sf.x0), len(sf.y0)
        d, e = config.gaussian.dim_fbm, sf.dim_bm
        return cls(
            f=build_coefficient(sf.f, m + n, (m,)),
            sigma=build_coefficient(sf.sigma, m, (m, d)),
            F=build_coefficient(sf.F, m + n, (n,)),
            G=build_coefficient(sf.G, m + n, (n, e)),
            eps=sf.eps,
            delta=sf.delta,
            hurst=config.gaussian.hurst,
            x0=np.asarray(sf.x0, dtype=float),
            y0=np.asarray(sf.y0, dtype=float),
            assumptions=AssumptionParams(sf.lipschitz, sf.beta1, sf.beta2, sf.growth_c),
            bar_f=build_coefficient(sf.bar_f, m, (m,)) if sf.bar_f is not None else None,
        )


# ---------------------------------------------------------------------------
# Dissipativity spot-check
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class DissipativityReport:
    n_points: int
    contraction_margin: float  # max of LHS + β₁|y₁−y₂|²; ≤ 0 passes
    growth_margin: float  # max of LHS + β₂|y|² − C|x|² − C; ≤ 0 passes

    @property
    def contraction_ok(self) -> bool:
        return self.contraction_margin <= 1e-10

    @property
    def growth_ok(self) -> bool:
        return self.growth_margin <= 1e-10

    @property
    def passed(self) -> bool:
        return self.contraction_ok and self.growth_ok


def check_dissipativity(
    spec: SlowFastSpec, n_points: int = 100, radius: float = 5.0, seed: int = 0
) -> DissipativityReport:
    """
    Sample both dissipativity inequalities for F̃ and G at random (x, y₁, y₂)
    in a box.  Failures are logged, never raised.
    """
    rng = np.random.default_rng([seed, n_points])
    x = radius * rng.uniform(-1.0, 1.0, size=(n_points, spec.m))
    y1 = radius * rng.uniform(-1.0, 1.0, size=(n_points, spec.n))
    y2 = radius * rng.uniform(-1.0, 1.0, size=(n_points, spec.n))
    ft = spec.corrected_drift()
    z1, z2 = spec.joint(x, y1), spec.joint(x, y2)
    dy = y1 - y2
    dg = spec.G.value(z1) - spec.G.value(z2)
    lhs1 = 2.0 * np.sum(dy * (ft(z1) - ft(z2)), axis=-1) + np.sum(dg**2, axis=(-2, -1))
    contraction = float(np.max(lhs1 + spec.assumptions.beta1 * np.sum(dy**2, axis=-1)))

    c = spec.assumptions.growth_c
    lhs2 = 2.0 * np.sum(y1 * ft(z1), axis=-1) + np.sum(spec.G.value(z1) ** 2, axis=(-2, -1))
    rhs2 = -spec.assumptions.beta2 * np.sum(y1**2, axis=-1) + c * np.sum(x**2, axis=-1) + c
    growth = float(np.max(lhs2 - rhs2))

    report = DissipativityReport(n_points, contraction, growth)
    if not report.contraction_ok:
        logger.warning(
            "dissipativity spot-check failed for beta1=%.3g (margin %.3g)",
            spec.assumptions.beta1,
            contraction,
        )
    if not report.growth_ok:
        logger.warning(
            "growth spot-check failed for beta2=%.3g, C=%.3g (margin %.3g)",
            spec.assumptions.beta2,
            c,
            growth,
        )
    return report


__all__ = [
    "AssumptionParams",
    "ito_correction",
    "SlowFastSpec",
    "DissipativityReport",
    "check_dissipativity",
]
