"""
Deviation problems: the base system, the deviation scale h(ε), rare events
on the observable path, batch simulation and the Gaussian oracles used to
check the whole chain.
"""

from __future__ import annotations

import logging
import math
from collections.abc import Sequence
from dataclasses import dataclass
from typing import Optional

import numpy as np
from numpy.typing import ArrayLike
from scipy import integrate

from roughdev.core import DevlabConfig
from roughdev.core.errors import InvalidInputError
from roughdev.core.scenario import EventKind, EventSpec, HMode, ProblemKind, h_value, speed
from roughdev.gaussian.lift import lift_mixed_batch
from roughdev.gaussian.sampling import FbmSpec, fbm_covariance, sample_bm_batch, sample_fbm_batch
from roughdev.rough.algebra import Array
from roughdev.rough.controlled import SmoothFunction4
from roughdev.rough.rde import rk4_path, solve_rde_batch
from roughdev.rough.roughpath import HolderExponents
from roughdev.slowfast.averaging import AveragedModel, averaged_path
from roughdev.slowfast.palette import build_coefficient
from roughdev.slowfast.simulate import fast_grid, simulate_slow_fast
from roughdev.slowfast.system import SlowFastSpec

logger = logging.getLogger(__name__)


# ---------------------------------------------------------------------------
# Problems
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class SingleScaleProblem:
    """dX = f(X) dt + √ε σ(X) d(b^H, w); σ has d + e columns."""

    drift: SmoothFunction4
    sigma: SmoothFunction4
    x0: Array
    hurst: float
    dim_fbm: int = 1
    dim_bm: int = 0

    def __post_init__(self) -> None:
        x0 = np.atleast_1d(np.asarray(self.x0, dtype=float))
        object.__setattr__(self, "x0", x0)
        m = x0.shape[0]
        if self.drift.in_dim != m or self.drift.out_shape != (m,):
            raise InvalidInputError(f"drift must map R^{m} to R^{m}")
        if self.sigma.in_dim != m or self.sigma.out_shape != (m, self.dim_fbm + self.dim_bm):
            raise InvalidInputError(
                f"sigma must map R^{m} to {m} x {self.dim_fbm + self.dim_bm} matrices"
            )

    @property
    def m(self) -> int:
        return int(self.x0.shape[0])

    @classmethod
    def from_config(cls, config: DevlabConfig) -> "SingleScaleProblem":
        ss, gauss = config.single_scale, config.gaussian
        m = len(ss.x0)
        k = gauss.dim_fbm + gauss.dim_bm
        return cls(
            drift=build_coefficient(ss.drift, m, (m,)),
            sigma=build_coefficient(ss.sigma, m, (m, k)),
            x0=np.asarray(ss.x0, dtype=float),
            hurst=gauss.hurst,
            dim_fbm=gauss.dim_fbm,
            dim_bm=gauss.dim_bm,
        )


def check_mdp_scaling(schedule: Sequence[float], theta: float) -> None:
    """h(ε) must grow and √ε·h(ε) shrink along the decreasing schedule."""
    eps = sorted(set(schedule), reverse=True)
    h = np.array([h_value(e, HMode.MDP, theta) for e in eps])
    product = np.sqrt(eps) * h
    if len(eps) > 1 and (np.any(np.diff(h) <= 0) or np.any(np.diff(product) >= 0)):
        raise InvalidInputError(
            f"theta={theta} does not give h -> inf and sqrt(eps) h -> 0 on {list(schedule)}"
        )


@dataclass(frozen=True)
class DeviationSpec:
    problem: ProblemKind
    h_mode: HMode
    theta: float
    eps_schedule: tuple[float, ...]
    event: EventSpec
    mc_runs: int
    single: Optional[SingleScaleProblem] = None
    slow_fast: Optional[SlowFastSpec] = None

    def __post_init__(self) -> None:
        if self.problem is ProblemKind.SINGLE_SCALE and self.single is None:
            raise InvalidInputError("single-scale deviation problem without a base system")
        if self.problem is ProblemKind.SLOW_FAST and self.slow_fast is None:
            raise InvalidInputError("slow-fast deviation problem without a base system")
        if any(not 0.0 < e < 1.0 for e in self.eps_schedule):
            raise InvalidInputError(f"eps schedule {self.eps_schedule} must lie in (0, 1)")
        if self.h_mode is HMode.MDP:
            check_mdp_scaling(self.eps_schedule, self.theta)
        if self.event.component >= self.m:
            raise InvalidInputError(
                f"event component {self.event.component} outside the {self.m}-dimensional state"
            )

    @property
    def m(self) -> int:
        if self.single is not None:
            return self.single.m
        assert self.slow_fast is not None
        return self.slow_fast.m

    @property
    def x0(self) -> Array:
        if self.single is not None:
            return self.single.x0
        assert self.slow_fast is not None
        return self.slow_fast.x0

    def h(self, eps: float) -> float:
        return h_value(eps, self.h_mode, self.theta)

    def speed(self, eps: float) -> float:
        return speed(eps, self.h_mode, self.theta)

    @classmethod
    def from_config(cls, config: DevlabConfig) -> "DeviationSpec":
        dev = config.deviation
        single = slow = None
        if dev.problem is ProblemKind.SINGLE_SCALE:
            single = SingleScaleProblem.from_config(config)
        else:
            slow = SlowFastSpec.from_config(config)
        return cls(
            problem=dev.problem,
            h_mode=dev.h_mode,
            theta=dev.theta,
            eps_schedule=tuple(dev.eps_schedule),
            event=dev.event,
            mc_runs=config.monte_carlo.n_runs,
            single=single,
            slow_fast=slow,
        )


# ---------------------------------------------------------------------------
# Paths
# ---------------------------------------------------------------------------


def fbm_spec_for(config: DevlabConfig, dim: int) -> FbmSpec:
    gauss = config.gaussian
    return FbmSpec(
        hurst=gauss.hurst,
        dim=dim,
        n_steps=gauss.n_steps,
        horizon=gauss.horizon,
        test_mode=gauss.test_mode,
        cholesky_max=gauss.cholesky_max,
    )


def limit_path(dspec: DeviationSpec, config: DevlabConfig, times: ArrayLike) -> Array:
    """The noiseless limit: dX = f(X) dt, or dX̄ = f̄(X̄) dt for slow-fast systems."""
    if dspec.single is not None:
        return rk4_path(dspec.single.drift.value, dspec.single.x0, times)
    assert dspec.slow_fast is not None
    bar_f = AveragedModel(dspec.slow_fast, config.slow_fast, config.seed).function()
    return averaged_path(bar_f, dspec.slow_fast.x0, times)


def slow_fast_delta(config: DevlabConfig, eps: float) -> float:
    dev = config.deviation
    return dev.delta_scale * eps**dev.delta_power


def simulate_single_scale(
    problem: SingleScaleProblem, config: DevlabConfig, eps: float, seed: int, indices: Sequence[int]
) -> tuple[Array, Array]:
    """(times, X^ε (B, N+1, m)) for trajectories ``indices``."""
    fspec = fbm_spec_for(config, problem.dim_fbm)
    times = fspec.times
    fbm = sample_fbm_batch(fspec, seed, indices)
    bm = sample_bm_batch(times, problem.dim_bm, seed, indices) if problem.dim_bm else None
    exps = HolderExponents.for_hurst(problem.hurst, config.gaussian.kappa)
    drivers = lift_mixed_batch(times, fbm, bm, exps, config.gaussian.lift_mode, math.sqrt(eps))
    values = solve_rde_batch(problem.sigma, drivers, problem.x0, problem.drift, config.solver)
    return times, values


def simulate_batch(
    dspec: DeviationSpec, config: DevlabConfig, eps: float, seed: int, indices: Sequence[int]
) -> tuple[Array, Array]:
    """(times, slow paths (B, N+1, m)) of the base system at scale ε."""
    if dspec.single is not None:
        return simulate_single_scale(dspec.single, config, eps, seed, indices)
    assert dspec.slow_fast is not None
    spec = dspec.slow_fast.with_scales(eps, slow_fast_delta(config, eps))
    fspec = fbm_spec_for(config, spec.d)
    fbm = sample_fbm_batch(fspec, seed, indices)
    grid = fast_grid(fspec.times, spec.delta, config.slow_fast)
    paths = simulate_slow_fast(spec, grid, fbm, seed, indices)
    return fspec.times, paths.slow


def deviation_process(
    trajectory: ArrayLike,
    limit: ArrayLike,
    eps: float,
    h_mode: HMode | str,
    theta: float = 0.5,
) -> Array:
    """Z = (X^ε − X)/(√ε h(ε)); ``trajectory`` may carry leading batch axes."""
    x = np.asarray(trajectory, dtype=float)
    ref = np.asarray(limit, dtype=float)
    if x.shape[-ref.ndim :] != ref.shape:
        raise InvalidInputError(f"trajectory {x.shape} and limit {ref.shape} are not on one grid")
    return (x - ref) / (math.sqrt(eps) * h_value(eps, h_mode, theta))


def observable(dspec: DeviationSpec, eps: float, paths: Array, limit: Array) -> Array:
    """The path the event is read from: X^ε for LDP, the deviation process otherwise."""
    if dspec.h_mode is HMode.LDP:
        return paths
    return deviation_process(paths, limit, eps, dspec.h_mode, dspec.theta)


def event_reference(dspec: DeviationSpec, limit: Array) -> Array:
    """Centre of sup-norm events: the limit path for X^ε, zero for Z^ε."""
    return limit if dspec.h_mode is HMode.LDP else np.zeros_like(limit)


def event_value(paths: ArrayLike, event: EventSpec, reference: Optional[ArrayLike] = None) -> Array:
    """
    φ(path) for a batch (B, N+1, m) or a single path (N+1, m); the event is
    φ ≥ threshold.
    """
    x = np.asarray(paths, dtype=float)
    k = event.component
    if event.kind is EventKind.TERMINAL:
        return x[..., -1, k]
    ref = 0.0 if reference is None else np.asarray(reference, dtype=float)[..., k]
    return np.max(np.abs(x[..., k] - ref), axis=-1)


# ---------------------------------------------------------------------------
# Gaussian oracles
# ---------------------------------------------------------------------------


def clt_variance_oracle(decay: float, hurst: float, horizon: float = 1.0, sigma: float = 1.0) -> float:
    """
    Var Z_T for dZ = −λ Z dt + σ db^H, Z_0 = 0.  With g(s) = e^{−λ(T−s)},
    Z_T = σ(b_T − λ ∫ g(s) b_s ds), so

        Var = σ²(R(T,T) − 2λ ∫ g(s) R(T,s) ds + λ² ∫∫ g(s) g(r) R(s,r) dr ds).
    """
    t_end = horizon

    def g(s: float) -> float:
        return math.exp(-decay * (t_end - s))

    def cov(s: float, r: float) -> float:
        return float(fbm_covariance(np.array(s), np.array(r), hurst))

    single, _ = integrate.quad(lambda s: g(s) * cov(t_end, s), 0.0, t_end, epsabs=1e-12)
    # symmetric in (s, r): twice the integral over r < s
    double, _ = integrate.dblquad(
        lambda r, s: g(s) * g(r) * cov(s, r), 0.0, t_end, 0.0, lambda s: s, epsabs=1e-12
    )
    var = cov(t_end, t_end) - 2.0 * decay * single + decay**2 * 2.0 * double
    return sigma**2 * var


def terminal_std(
    eps: float,
    h_mode: HMode | str,
    hurst: float,
    horizon: float = 1.0,
    sigma: float = 1.0,
    theta: float = 0.5,
) -> float:
    """Standard deviation of the observable at T for dX = √ε σ db^H."""
    base = sigma * math.sqrt(float(fbm_covariance(np.array(horizon), np.array(horizon), hurst)))
    mode = HMode(h_mode)
    if mode is HMode.LDP:
        return math.sqrt(eps) * base
    return base / h_value(eps, mode, theta)


__all__ = [
    "SingleScaleProblem",
    "check_mdp_scaling",
    "DeviationSpec",
    "fbm_spec_for",
    "limit_path",
    "slow_fast_delta",
    "simulate_single_scale",
    "simulate_batch",
    "deviation_process",
    "observable",
    "event_reference",
    "event_value",
    "clt_variance_oracle",
    "terminal_std",
]
