"""
Solvers.

- ``solve_rde``: dY = f(Y) dt + σ(Y) dX for a rough driver X (1/4 < α ≤ 1/3),
  by Picard iteration of the level-3 Davie expansion on subintervals of
  length τ < λ, with time adjoined to the driver as coordinate 0.
- ``solve_young``: the Young skeleton dY = f(Y) dt + σ(Y) d(u, v) driven by a
  finite q-variation path, by Euler refinement with Richardson extrapolation.
- ``stability_probe``: empirical local Lipschitz constant of the Itô–Lyons map.
"""

from __future__ import annotations

import logging
import math
from collections.abc import Callable, Sequence
from dataclasses import dataclass
from typing import Optional, Protocol

import numpy as np
import pandas as pd
from numpy.typing import ArrayLike

from roughdev.core import SolverConfig, YoungConfig
from roughdev.core.budget import Budget
from roughdev.core.errors import (
    BudgetExhaustedError,
    DriverRejectedError,
    InvalidInputError,
    SolverError,
)
from roughdev.core.scenario import PairMode, StepRule
from roughdev.rough.algebra import Array, Levels, PiecewiseLinearPath
from roughdev.rough.controlled import ControlledPath, SmoothFunction4
from roughdev.rough.roughpath import (
    HolderExponents,
    RoughPath,
    batch_holder_norms,
    homogeneous_norm,
    path_holder_norm,
    q_variation,
    rp_distance,
    time_adjoined_levels,
    translate_path,
    variation_exponents,
    window,
)

logger = logging.getLogger(__name__)

Field = Callable[[Array], Array]


# ---------------------------------------------------------------------------
# Vector fields
# ---------------------------------------------------------------------------


class VectorField(Protocol):
    """V : ℝ^m → ℝ^{m×D} with first two derivatives, batch-aware."""

    def value(self, y: Array) -> Array: ...

    def grad(self, y: Array) -> Array: ...

    def hess(self, y: Array) -> Array: ...


class DriftDiffusionField:
    """V(y) = [f(y) | σ(y)]: column 0 is driven by time, the rest by X."""

    def __init__(self, drift: Optional[SmoothFunction4], sigma: SmoothFunction4) -> None:
        if len(sigma.out_shape) != 2 or sigma.out_shape[0] != sigma.in_dim:
            raise InvalidInputError(
                f"sigma must map R^m to m x d matrices, got {sigma.in_dim} -> {sigma.out_shape}"
            )
        self.m = sigma.in_dim
        self.d = sigma.out_shape[1]
        if drift is not None and (drift.in_dim != self.m or drift.out_shape != (self.m,)):
            raise InvalidInputError(
                f"drift must map R^{self.m} to R^{self.m}, got {drift.in_dim} -> {drift.out_shape}"
            )
        self.drift = drift
        self.sigma = sigma

    def _drift(self, order: int, y: Array) -> Array:
        if self.drift is None:
            return np.zeros(y.shape[:-1] + (self.m,) + (self.m,) * order)
        return self.drift.derivative(order, y)

    def value(self, y: Array) -> Array:
        return np.concatenate([self._drift(0, y)[..., None], self.sigma.value(y)], axis=-1)

    def grad(self, y: Array) -> Array:
        return np.concatenate([self._drift(1, y)[..., None, :], self.sigma.grad(y)], axis=-2)

    def hess(self, y: Array) -> Array:
        return np.concatenate(
            [self._drift(2, y)[..., None, :, :], self.sigma.hess(y)], axis=-3
        )


def davie_increment(field: VectorField, y: Array, x1: Array, x2: Array, x3: Array) -> Array:
    """
    Level-3 local expansion of dY = V(Y) dX from left points ``y`` (B, m):

        V^a X¹[a] + (∂V^a V^p) X²[p, a] + (second-order coefficient) X³[p, q, a]
    """
    v = field.value(y)  # (B, m, D)
    dv = field.grad(y)  # (B, m, D, m)
    d2v = field.hess(y)  # (B, m, D, m, m)
    w_dag = np.einsum("bkaj,bjp->bkap", dv, v)
    y_ddag = np.swapaxes(w_dag, -1, -2)  # Y††[j, p, q] = Σ_i ∂_iV[j, q] V[i, p]
    w_ddag = np.einsum("bkaj,bjpq->bkapq", dv, y_ddag) + np.einsum(
        "bkaij,bip,bjq->bkapq", d2v, v, v
    )
    return (
        np.einsum("bka,ba->bk", v, x1)
        + np.einsum("bkap,bpa->bk", w_dag, x2)
        + np.einsum("bkapq,bpqa->bk", w_ddag, x3)
    )


# ---------------------------------------------------------------------------
# Local existence step
# ---------------------------------------------------------------------------


def local_step_size(
    constant_k: float,
    rough_norm: float,
    exponents: HolderExponents,
    c_beta: float = 4.01,
    nu_hat: float = 2.01,
) -> tuple[float, float]:
    """λ = {C_β (K+1)^ν̂ (⫼X⫼+1)^ν̂}^{−1/(α−β)}; returns (λ, log10 λ)."""
    gap = exponents.alpha - exponents.beta
    log_lam = -(
        math.log(c_beta) + nu_hat * math.log1p(constant_k) + nu_hat * math.log1p(rough_norm)
    ) / gap
    return math.exp(log_lam), log_lam / math.log(10.0)


@dataclass(frozen=True)
class StepRecord:
    """One accepted subinterval of the rough solver."""

    start: int
    stop: int
    tau: float
    iterations: int
    # largest ratio of successive Picard sweep distances; the sweeps settle
    # after at most (stop − start) + 1 passes
    sweep_ratio: float
    halvings: int


@dataclass(frozen=True)
class _PicardOutcome:
    y: Array
    iterations: int
    sweep_ratio: float
    converged: bool


def _distance(field: VectorField, a: Array, b: Array) -> float:
    scale = 1.0 + float(np.max(np.abs(a)))
    dy = float(np.max(np.abs(a - b)))
    dv = float(np.max(np.abs(field.value(a) - field.value(b))))
    return (dy + dv) / scale


def _picard(
    field: VectorField, y_start: Array, blocks: Levels, tol: float, max_iter: int
) -> _PicardOutcome:
    """
    Fixed point Y = y_start + Σ Ξ(Y) on a block of cells, for a batch of drivers.

    Ξ on a cell reads only the cell's left point, so each sweep settles one
    more cell: the iteration is forward substitution for the explicit Davie
    scheme and ends after at most k + 1 sweeps on k cells.  The recorded
    ``sweep_ratio`` is the largest ratio of successive sweep distances.
    """
    x1, x2, x3 = blocks
    batch, n, dim = x1.shape
    m = y_start.shape[-1]
    y = np.repeat(y_start[:, None, :], n + 1, axis=1)
    prev: Optional[float] = None
    ratio = 0.0
    flat = (
        x1.reshape(batch * n, dim),
        x2.reshape(batch * n, dim, dim),
        x3.reshape(batch * n, dim, dim, dim),
    )
    for it in range(1, max_iter + 1):
        xi = davie_increment(field, y[:, :-1].reshape(batch * n, m), *flat).reshape(batch, n, m)
        start = y_start[:, None, :]
        new = np.concatenate([start, start + np.cumsum(xi, axis=1)], axis=1)
        if not np.all(np.isfinite(new)):
            return _PicardOutcome(new, it, math.inf, False)
        # the next iterate only reads left points: unchanged left points mean a fixed point
        if np.array_equal(new[:, :-1], y[:, :-1]):
            return _PicardOutcome(new, it, ratio, True)
        dist = _distance(field, new, y)
        if prev is not None and prev > 0.0:
            ratio = max(ratio, dist / prev)
        y = new
        if dist <= tol:
            return _PicardOutcome(y, it, ratio, True)
        prev = dist
    return _PicardOutcome(y, max_iter, ratio, False)


def _cells_within(times: Array, start: int, length: float) -> int:
    """Largest k >= 1 with t_{start+k} − t_start < length."""
    stop = int(np.searchsorted(times, times[start] + length, side="left")) - 1
    return max(1, stop - start)


def _integrate_blocks(
    field: VectorField,
    y0: Array,
    times: Array,
    blocks: Levels,
    lam: float,
    config: SolverConfig,
    budget: Optional[Budget],
) -> tuple[Array, list[StepRecord], int]:
    """March over the grid subinterval by subinterval; returns (Y, steps, last index reached)."""
    batch, n = blocks[0].shape[:2]
    y = np.empty((batch, n + 1, y0.shape[-1]))
    y[:, 0] = y0
    steps: list[StepRecord] = []
    i = 0
    while i < n:
        if budget is not None and not budget.consume():
            logger.warning("subinterval budget exhausted at t=%.6g", times[i])
            break
        if config.step_rule is StepRule.FIXED:
            k = config.fixed_cells
        else:
            k = _cells_within(times, i, lam)
        k = min(k, n - i)
        halvings = 0
        while True:
            window_blocks = tuple(a[:, i : i + k] for a in blocks)
            out = _picard(field, y[:, i], window_blocks, config.tol, config.max_picard)  # type: ignore[arg-type]
            if out.converged:
                break
            if k == 1:
                raise SolverError(
                    f"Picard iteration failed on a single cell at t={times[i]:.6g}",
                    start=i,
                    sweep_ratio=out.sweep_ratio,
                )
            k = max(1, k // 2)
            halvings += 1
            logger.warning(
                "Picard sweeps did not settle at t=%.6g, halving tau to %d cells", times[i], k
            )
        y[:, i + 1 : i + k + 1] = out.y[:, 1:]
        steps.append(
            StepRecord(i, i + k, float(times[i + k] - times[i]), out.iterations, out.sweep_ratio, halvings)
        )
        i += k
    return y[:, : i + 1], steps, i


# ---------------------------------------------------------------------------
# Rough solver
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class RdeProblem:
    """dY = f(Y) dt + σ(Y) dX, Y_0 = initial."""

    sigma: SmoothFunction4
    driver: RoughPath
    initial: Array
    drift: Optional[SmoothFunction4] = None

    def __post_init__(self) -> None:
        y0 = np.atleast_1d(np.asarray(self.initial, dtype=float))
        object.__setattr__(self, "initial", y0)
        if self.sigma.in_dim != y0.shape[0]:
            raise InvalidInputError(
                f"initial condition has dimension {y0.shape[0]}, sigma expects {self.sigma.in_dim}"
            )
        if self.sigma.out_shape != (y0.shape[0], self.driver.dim):
            raise InvalidInputError(
                f"sigma has shape {self.sigma.out_shape}, expected ({y0.shape[0]}, {self.driver.dim})"
            )
        DriftDiffusionField(self.drift, self.sigma)

    @property
    def m(self) -> int:
        return int(self.initial.shape[0])

    def field(self) -> DriftDiffusionField:
        return DriftDiffusionField(self.drift, self.sigma)

    def constant_k(self) -> float:
        """K = max(‖σ‖_{C⁴_b}, L): recorded bounds where known, sample estimates otherwise."""
        k = self.sigma.estimate_bound(center=self.initial)
        if self.drift is not None:
            k = max(k, self.drift.estimate_lipschitz(center=self.initial))
        return k


@dataclass(frozen=True)
class GrowthDiagnostics:
    """‖Y‖_β compared with the growth shape ((K+1)(⫼X⫼+1))^ν̂."""

    holder_beta: float
    bound_shape: float
    ratio: float


@dataclass(frozen=True)
class RdeSolution:
    path: ControlledPath
    steps: list[StepRecord]
    lam: float
    log10_lam: float
    lambda_below_mesh: bool
    rough_norm: float
    constant_k: float
    complete: bool
    growth: Optional[GrowthDiagnostics] = None

    @property
    def times(self) -> Array:
        return self.path.times

    @property
    def values(self) -> Array:
        return self.path.y

    def step_frame(self) -> pd.DataFrame:
        return pd.DataFrame([s.__dict__ for s in self.steps])


def solution_derivatives(sigma: SmoothFunction4, y: Array) -> tuple[Array, Array]:
    """Y† = σ(Y) and Y††[k, p, q] = Σ_j ∂_jσ[k, q] σ[j, p] along a path."""
    sig = sigma.value(y)
    dsig = sigma.grad(y)
    return sig, np.einsum("nkqj,njp->nkpq", dsig, sig)


def solve_rde(
    problem: RdeProblem,
    config: Optional[SolverConfig] = None,
    budget: Optional[Budget] = None,
) -> RdeSolution:
    """
    Solve on the driver's grid.  A subinterval budget that runs out returns
    the solution up to the last completed subinterval with ``complete=False``.
    """
    cfg = config or SolverConfig()
    driver = problem.driver
    exps = driver.exponents
    pairs = cfg.holder_pairs
    if pairs is PairMode.AUTO and driver.n_steps > cfg.dyadic_threshold:
        pairs = PairMode.DYADIC
    rough_norm = homogeneous_norm(driver, pairs=pairs)
    k = problem.constant_k()
    lam, log10_lam = local_step_size(k, rough_norm, exps, cfg.c_beta, cfg.nu_hat)
    mesh = float(np.min(np.diff(driver.times)))
    below = lam < mesh
    if below:
        logger.debug("lambda=10^%.1f below the grid mesh; one cell per subinterval", log10_lam)
    if budget is None and cfg.max_subintervals is not None:
        budget = Budget(name="subintervals", limit=cfg.max_subintervals)

    levels = time_adjoined_levels(driver.times, driver.blocks, driver.piecewise_linear)
    blocks = tuple(a[None] for a in levels)
    y, steps, reached = _integrate_blocks(
        problem.field(), problem.initial[None], driver.times, blocks, lam, cfg, budget  # type: ignore[arg-type]
    )
    if reached == 0:
        raise BudgetExhaustedError("subinterval budget exhausted before the first step")
    complete = reached == driver.n_steps
    ref = driver if complete else window(driver, 0, reached)
    values = y[0]
    y_dag, y_ddag = solution_derivatives(problem.sigma, values)
    path = ControlledPath(ref, values, y_dag, y_ddag)

    growth = None
    if complete:
        seminorm = float(path_holder_norm(driver.times, values, exps.beta, pairs=pairs, include_start=False))
        shape = ((k + 1.0) * (rough_norm + 1.0)) ** cfg.nu_hat
        growth = GrowthDiagnostics(seminorm, shape, seminorm / shape)
    return RdeSolution(path, steps, lam, log10_lam, below, rough_norm, k, complete, growth)


@dataclass(frozen=True)
class DriverBatch:
    """Many drivers on one grid, stored as stacked cell blocks (B, N, ...)."""

    times: Array
    levels: Levels
    exponents: HolderExponents
    piecewise_linear: bool = True

    @classmethod
    def from_paths(cls, paths: Sequence[RoughPath]) -> "DriverBatch":
        if not paths:
            raise InvalidInputError("empty driver batch")
        first = paths[0]
        for rp in paths[1:]:
            if rp.times.shape != first.times.shape or rp.dim != first.dim:
                raise InvalidInputError("drivers in a batch must share grid and dimension")
        levels = tuple(np.stack([rp.blocks[k] for rp in paths]) for k in range(3))
        return cls(
            first.times,
            levels,  # type: ignore[arg-type]
            first.exponents,
            all(rp.piecewise_linear for rp in paths),
        )

    @property
    def size(self) -> int:
        return int(self.levels[0].shape[0])


def solve_rde_batch(
    sigma: SmoothFunction4,
    drivers: DriverBatch,
    initial: ArrayLike,
    drift: Optional[SmoothFunction4] = None,
    config: Optional[SolverConfig] = None,
) -> Array:
    """Solve for a whole batch of drivers at once; returns (B, N+1, m)."""
    cfg = config or SolverConfig()
    field = DriftDiffusionField(drift, sigma)
    y0 = np.broadcast_to(np.asarray(initial, dtype=float), (drivers.size, field.m)).copy()
    norms = batch_holder_norms(drivers.times, drivers.levels, drivers.exponents.alpha)
    rough_norm = float(np.max(norms[:, 0] + norms[:, 1] ** 0.5 + norms[:, 2] ** (1.0 / 3.0)))
    k = sigma.estimate_bound(center=y0[0])
    if drift is not None:
        k = max(k, drift.estimate_lipschitz(center=y0[0]))
    lam, _ = local_step_size(k, rough_norm, drivers.exponents, cfg.c_beta, cfg.nu_hat)
    levels = time_adjoined_levels(drivers.times, drivers.levels, drivers.piecewise_linear)
    y, _, reached = _integrate_blocks(field, y0, drivers.times, levels, lam, cfg, None)
    if reached != drivers.levels[0].shape[1]:
        raise SolverError("batch solve stopped early")
    return y


# ---------------------------------------------------------------------------
# Deterministic and Young solvers
# ---------------------------------------------------------------------------


def rk4_path(fn: Field, x0: ArrayLike, times: ArrayLike, substeps: int = 4) -> Array:
    """Classical RK4 for x' = fn(x) sampled on ``times``; fn is batch-aware."""
    t = np.asarray(times, dtype=float)
    x = np.asarray(x0, dtype=float).copy()
    out = np.empty((t.shape[0],) + x.shape)
    out[0] = x
    for i in range(t.shape[0] - 1):
        h = (t[i + 1] - t[i]) / substeps
        for _ in range(substeps):
            k1 = fn(x)
            k2 = fn(x + 0.5 * h * k1)
            k3 = fn(x + 0.5 * h * k2)
            k4 = fn(x + h * k3)
            x = x + h * (k1 + 2.0 * k2 + 2.0 * k3 + k4) / 6.0
        out[i + 1] = x
    return out


@dataclass(frozen=True)
class YoungProblem:
    """dY = f(Y) dt + σ(Y) d(u, v) for a piecewise-linear driver of finite q-variation."""

    drift: Field
    diffusion: Field
    driver: PiecewiseLinearPath
    initial: Array
    hurst: Optional[float] = None  # enables the q-variation check
    kappa: float = 0.01


@dataclass(frozen=True)
class YoungSolution:
    times: Array
    values: Array
    refinements: int
    converged: bool
    q_variation: Optional[tuple[float, float]] = None


def young_euler(
    drift: Field, diffusion: Field, times: Array, driver: Array, y0: Array, substeps: int
) -> Array:
    """Euler on ``substeps`` equal pieces of each cell; driver (B, N+1, k), y0 (B, m)."""
    n = times.shape[0] - 1
    inc = np.diff(driver, axis=1) / substeps
    dt = np.diff(times) / substeps
    y = y0.copy()
    out = np.empty((y0.shape[0], n + 1, y0.shape[1]))
    out[:, 0] = y
    for i in range(n):
        for _ in range(substeps):
            y = y + drift(y) * dt[i] + np.einsum("bmk,bk->bm", diffusion(y), inc[:, i])
        out[:, i + 1] = y
    return out


def young_richardson(
    drift: Field, diffusion: Field, times: Array, driver: Array, y0: Array, substeps: int
) -> Array:
    """2·Euler(2s) − Euler(s) with s = ``substeps`` pieces per cell."""
    coarse = young_euler(drift, diffusion, times, driver, y0, substeps)
    fine = young_euler(drift, diffusion, times, driver, y0, 2 * substeps)
    out = 2.0 * fine - coarse
    if not np.all(np.isfinite(out)):
        raise SolverError("Young solver diverged", substeps=substeps)
    return out


def solve_young_batch(
    drift: Field,
    diffusion: Field,
    times: ArrayLike,
    driver: ArrayLike,
    initial: ArrayLike,
    config: Optional[YoungConfig] = None,
) -> tuple[Array, int, bool]:
    """
    Refine 1, 2, 4, ... substeps with Richardson extrapolation until successive
    estimates agree, or take the single pair ``config.fixed_substeps``.
    """
    cfg = config or YoungConfig()
    t = np.asarray(times, dtype=float)
    u = np.asarray(driver, dtype=float)
    if u.ndim == 2:
        u = u[None]
    y0 = np.asarray(initial, dtype=float)
    if y0.ndim == 1:
        y0 = np.broadcast_to(y0, (u.shape[0], y0.shape[0]))
    y0 = np.array(y0)
    if cfg.fixed_substeps is not None:
        return young_richardson(drift, diffusion, t, u, y0, cfg.fixed_substeps), 1, True
    coarse = young_euler(drift, diffusion, t, u, y0, 1)
    previous: Optional[Array] = None
    estimate = coarse
    for r in range(1, cfg.max_refinements + 1):
        fine = young_euler(drift, diffusion, t, u, y0, 2**r)
        estimate = 2.0 * fine - coarse
        if not np.all(np.isfinite(estimate)):
            raise SolverError("Young solver diverged", refinement=r)
        if previous is not None:
            gap = float(np.max(np.abs(estimate - previous)))
            if gap <= cfg.tol * (1.0 + float(np.max(np.abs(estimate)))):
                return estimate, r, True
        previous, coarse = estimate, fine
    logger.warning("Young solver not converged after %d refinements", cfg.max_refinements)
    return estimate, cfg.max_refinements, False


def check_driver_variation(
    driver: PiecewiseLinearPath, hurst: float, kappa: float, ratio: float
) -> tuple[float, float]:
    """Reject drivers whose q-variation keeps growing under grid refinement."""
    _, q = variation_exponents(hurst, kappa)
    fine = float(q_variation(driver.values, q))
    coarse = float(q_variation(driver.values[::2], q)) if driver.n_segments >= 8 else fine
    if coarse > 0.0 and fine / coarse > ratio:
        raise DriverRejectedError(
            f"{q:.3f}-variation grows from {coarse:.4g} to {fine:.4g} under refinement",
            q=q,
        )
    return fine, coarse


def solve_young(problem: YoungProblem, config: Optional[YoungConfig] = None) -> YoungSolution:
    cfg = config or YoungConfig()
    qv = None
    if problem.hurst is not None and cfg.check_q_variation:
        qv = check_driver_variation(
            problem.driver, problem.hurst, problem.kappa, cfg.q_divergence_ratio
        )
    y0 = np.atleast_1d(np.asarray(problem.initial, dtype=float))
    values, refinements, converged = solve_young_batch(
        problem.drift,
        problem.diffusion,
        problem.driver.times,
        problem.driver.values[None],
        y0[None],
        cfg,
    )
    return YoungSolution(problem.driver.times, values[0], refinements, converged, qv)


def linearized_fields(
    drift: SmoothFunction4, diffusion: SmoothFunction4
) -> tuple[Field, Field]:
    """
    Fields of the augmented state (X, Z):
    dX = f(X) dt,  dZ = ∇f(X) Z dt + σ(X) d(u, v).
    """
    m = drift.in_dim
    k = diffusion.out_shape[1]

    def aug_drift(s: Array) -> Array:
        x, z = s[..., :m], s[..., m:]
        return np.concatenate(
            [drift.value(x), np.einsum("...ij,...j->...i", drift.grad(x), z)], axis=-1
        )

    def aug_diffusion(s: Array) -> Array:
        x = s[..., :m]
        return np.concatenate([np.zeros(s.shape[:-1] + (m, k)), diffusion.value(x)], axis=-2)

    return aug_drift, aug_diffusion


def linearized_problem(
    drift: SmoothFunction4,
    diffusion: SmoothFunction4,
    driver: PiecewiseLinearPath,
    x0: ArrayLike,
    hurst: Optional[float] = None,
) -> YoungProblem:
    """Skeleton of the moderate-deviation limit; the Z block of the solution is the answer."""
    aug_drift, aug_diffusion = linearized_fields(drift, diffusion)
    x = np.atleast_1d(np.asarray(x0, dtype=float))
    return YoungProblem(
        aug_drift, aug_diffusion, driver, np.concatenate([x, np.zeros_like(x)]), hurst
    )


# ---------------------------------------------------------------------------
# Stability probe
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class Perturbation:
    """Direction of a perturbation of (ξ, X); scaled by each magnitude in turn."""

    initial_delta: Optional[Array] = None
    driver_delta: Optional[PiecewiseLinearPath] = None
    magnitudes: tuple[float, ...] = (1e-1, 1e-2, 1e-3)


@dataclass(frozen=True)
class StabilityReport:
    rows: pd.DataFrame
    sup_ratio: float


def stability_probe(
    problem: RdeProblem,
    perturbations: Sequence[Perturbation],
    config: Optional[SolverConfig] = None,
) -> StabilityReport:
    """Ratios ‖Y − Ỹ‖_β / (|ξ − ξ̃| + ρ_α(X, X̃)) for each perturbation and magnitude."""
    base = solve_rde(problem, config)
    beta = problem.driver.exponents.beta
    rows = []
    for idx, pert in enumerate(perturbations):
        for mag in pert.magnitudes:
            xi = problem.initial
            driver = problem.driver
            if pert.initial_delta is not None:
                xi = xi + mag * np.asarray(pert.initial_delta, dtype=float)
            if pert.driver_delta is not None:
                shift = PiecewiseLinearPath(pert.driver_delta.times, mag * pert.driver_delta.values)
                driver = translate_path(driver, shift)
            other = solve_rde(
                RdeProblem(problem.sigma, driver, xi, problem.drift), config
            )
            num = float(path_holder_norm(base.times, base.values - other.values, beta))
            den = float(np.linalg.norm(problem.initial - xi)) + rp_distance(problem.driver, driver)
            if den == 0.0:
                ratio = 0.0 if num == 0.0 else math.inf
            else:
                ratio = num / den
            rows.append(
                {"perturbation": idx, "magnitude": mag, "numerator": num, "denominator": den, "ratio": ratio}
            )
    frame = pd.DataFrame(rows)
    sup_ratio = float(frame["ratio"].max()) if len(frame) else 0.0
    return StabilityReport(frame, sup_ratio)


__all__ = [
    "VectorField",
    "DriftDiffusionField",
    "davie_increment",
    "local_step_size",
    "StepRecord",
    "RdeProblem",
    "GrowthDiagnostics",
    "RdeSolution",
    "solution_derivatives",
    "solve_rde",
    "DriverBatch",
    "solve_rde_batch",
    "rk4_path",
    "YoungProblem",
    "YoungSolution",
    "young_euler",
    "young_richardson",
    "solve_young_batch",
    "check_driver_variation",
    "solve_young",
    "linearized_fields",
    "linearized_problem",
    "Perturbation",
    "StabilityReport",
    "stability_probe",
]
