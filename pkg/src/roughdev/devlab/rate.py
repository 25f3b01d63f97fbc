"""
Rate functions by optimisation over Cameron–Martin controls.

The skeleton map sends a control (u, v) to the noiseless controlled path;
the rate of an event {φ ≥ a} is the least ½‖(ĥ, v′)‖² among controls whose
skeleton reaches it.  Controls are parametrised cell-wise, and the
optimiser works in the coordinates φ = √|cell| θ, where the cost is ½|φ|².
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field, replace
from typing import Optional

import numpy as np
import pandas as pd
from numpy.typing import ArrayLike
from scipy import optimize

from roughdev.core import DevlabConfig, OptimizerConfig, YoungConfig
from roughdev.core.errors import InvalidInputError
from roughdev.core.scenario import HMode, OptimizerMethod
from roughdev.devlab.deviation import DeviationSpec, event_value
from roughdev.gaussian.cameron_martin import CameronMartinBasis, CameronMartinControl, cm_to_path
from roughdev.gaussian.sampling import FbmSpec
from roughdev.rough.algebra import Array
from roughdev.rough.controlled import SmoothFunction4
from roughdev.rough.rde import Field, YoungProblem, linearized_fields, solve_young, solve_young_batch
from roughdev.slowfast.averaging import AveragedModel

logger = logging.getLogger(__name__)

SKELETON_SUBSTEPS = 4


# ---------------------------------------------------------------------------
# Skeleton map
# ---------------------------------------------------------------------------


class SkeletonMap:
    """
    Control → observable skeleton path on the basis grid.

    Single-scale LDP:  dY = f(Y) dt + σ(Y) d(u, v).
    Single-scale MDP:  the Z block of (X, Z) with dZ = ∇f(X) Z dt + σ(X) d(u, v).
    Slow-fast LDP:     dY = f̄(Y) dt + σ(Y) du; the v component does not enter.
    Slow-fast MDP:     as single-scale MDP with f̄ in place of f and u alone.

    Every solve goes through the Young solver with a fixed number of Euler
    substeps and one Richardson correction, so the map is a smooth function
    of the control and finite differences of it are meaningful.  Single
    skeletons also pass the driver q-variation check.
    """

    def __init__(
        self,
        dspec: DeviationSpec,
        basis: CameronMartinBasis,
        drift: SmoothFunction4,
        sigma: SmoothFunction4,
        reference: Array,
        substeps: int = SKELETON_SUBSTEPS,
        young: Optional[YoungConfig] = None,
        hurst: Optional[float] = None,
        kappa: float = 0.01,
    ) -> None:
        if dspec.h_mode is HMode.CLT:
            raise InvalidInputError("the central limit regime has no rate function")
        self.dspec = dspec
        self.basis = basis
        self.substeps = substeps
        self.young = (young or YoungConfig()).model_copy(update={"fixed_substeps": substeps})
        self.hurst = hurst
        self.kappa = kappa
        self.reference = reference
        self.coefficients = (drift, sigma)
        self.slow_fast = dspec.slow_fast is not None
        self.m = dspec.m
        self._drift: Field
        self._diffusion: Field
        if dspec.h_mode is HMode.LDP:
            self._drift, self._diffusion = drift.value, sigma.value
            self._y0 = dspec.x0.copy()
            self._keep = slice(0, self.m)
        else:
            self._drift, self._diffusion = linearized_fields(drift, sigma)
            self._y0 = np.concatenate([dspec.x0, np.zeros(self.m)])
            self._keep = slice(self.m, 2 * self.m)

    @classmethod
    def from_spec(
        cls,
        dspec: DeviationSpec,
        config: DevlabConfig,
        basis: Optional[CameronMartinBasis] = None,
    ) -> "SkeletonMap":
        if basis is None:
            basis = build_basis(dspec, config)
        if dspec.single is not None:
            drift, sigma = dspec.single.drift, dspec.single.sigma
        else:
            assert dspec.slow_fast is not None
            sigma = dspec.slow_fast.sigma
            drift = AveragedModel(dspec.slow_fast, config.slow_fast, config.seed).function()
        gauss = config.gaussian
        skeleton = cls(
            dspec,
            basis,
            drift,
            sigma,
            np.zeros((basis.times.shape[0], dspec.m)),
            young=config.young,
            hurst=dspec.single.hurst if dspec.single is not None else gauss.hurst,
            kappa=gauss.kappa,
        )
        if dspec.h_mode is HMode.LDP:
            # the zero-control skeleton is the noiseless limit at the skeleton's own resolution
            skeleton.reference = skeleton.path(CameronMartinControl.zeros(basis))
        return skeleton

    @property
    def times(self) -> Array:
        return self.basis.times

    def with_threshold(self, level: float) -> "SkeletonMap":
        event = self.dspec.event.model_copy(update={"threshold": float(level)})
        return SkeletonMap(
            replace(self.dspec, event=event),
            self.basis,
            *self.coefficients,
            self.reference,
            self.substeps,
            self.young,
            self.hurst,
            self.kappa,
        )

    def _driver(self, ctrl: CameronMartinControl) -> Array:
        return cm_to_path(ctrl, fbm_only=self.slow_fast).values

    def solve(self, drivers: Array) -> Array:
        """Skeletons for a batch of driver values (P, N+1, k); returns (P, N+1, m)."""
        out, _, _ = solve_young_batch(
            self._drift, self._diffusion, self.times, drivers, self._y0, self.young
        )
        return out[..., self._keep]

    def path(self, ctrl: CameronMartinControl) -> Array:
        """Skeleton of one control, with the driver checked for finite q-variation."""
        problem = YoungProblem(
            self._drift,
            self._diffusion,
            cm_to_path(ctrl, fbm_only=self.slow_fast),
            self._y0,
            self.hurst,
            self.kappa,
        )
        return solve_young(problem, self.young).values[:, self._keep]

    def paths(self, thetas: Array) -> Array:
        drivers = np.stack(
            [self._driver(CameronMartinControl.from_vector(self.basis, t)) for t in thetas]
        )
        return self.solve(drivers)

    def margins(self, thetas: Array) -> Array:
        """φ(skeleton) − a for a batch of parameter vectors."""
        event = self.dspec.event
        return event_value(self.paths(thetas), event, self.reference) - event.threshold


def build_basis(dspec: DeviationSpec, config: DevlabConfig, n_cells: Optional[int] = None) -> CameronMartinBasis:
    opt, gauss = config.optimizer, config.gaussian
    dim_fbm = dspec.single.dim_fbm if dspec.single is not None else gauss.dim_fbm
    dim_bm = dspec.single.dim_bm if dspec.single is not None else config.slow_fast.dim_bm
    times = FbmSpec.from_config(gauss).times
    return CameronMartinBasis.build(
        dspec.single.hurst if dspec.single is not None else gauss.hurst,
        times,
        n_cells or opt.n_cells,
        dim_fbm,
        dim_bm,
        opt.kernel,
        opt.cell_layout,
    )


# ---------------------------------------------------------------------------
# Result types
# ---------------------------------------------------------------------------


def rate_value(ctrl: CameronMartinControl, skeleton: SkeletonMap) -> tuple[float, Array]:
    """½(‖ĥ‖² + ‖v′‖²), the cost of ``ctrl``, and its skeleton path."""
    if ctrl.basis.n_cells != skeleton.basis.n_cells or not np.allclose(
        ctrl.basis.edges, skeleton.basis.edges
    ):
        raise InvalidInputError("control and skeleton use different cell breakpoints")
    return ctrl.half_norm_sq, skeleton.path(ctrl)


@dataclass
class RateFunctionResult:
    control: CameronMartinControl
    value: float
    skeleton: Array  # (N+1, m) observable path
    times: Array
    feasible: bool
    violation: float
    method: OptimizerMethod
    trace: pd.DataFrame = field(default_factory=pd.DataFrame)

    @property
    def n_cells(self) -> int:
        return self.control.basis.n_cells

    def skeleton_frame(self) -> pd.DataFrame:
        return skeleton_frame(self.times, self.skeleton)

    def control_frame(self) -> pd.DataFrame:
        return control_to_frame(self.control)


def skeleton_frame(times: Array, path: Array) -> pd.DataFrame:
    frame = pd.DataFrame({"t": times})
    for i in range(path.shape[1]):
        frame[f"x_{i}"] = path[:, i]
    return frame


def control_to_frame(ctrl: CameronMartinControl) -> pd.DataFrame:
    """One row per cell: edges, ĥ components and v′ components."""
    edges = ctrl.basis.edges
    frame = pd.DataFrame({"cell": np.arange(ctrl.basis.n_cells), "t_start": edges[:-1], "t_end": edges[1:]})
    for j in range(ctrl.basis.dim_fbm):
        frame[f"hhat_{j}"] = ctrl.hhat[:, j]
    for j in range(ctrl.basis.dim_bm):
        frame[f"vprime_{j}"] = ctrl.vprime[:, j]
    return frame


def control_from_frame(frame: pd.DataFrame, basis: CameronMartinBasis) -> CameronMartinControl:
    """Read a control written by :func:`control_to_frame` onto ``basis``."""
    if len(frame) != basis.n_cells:
        raise InvalidInputError(f"control has {len(frame)} cells, the basis {basis.n_cells}")
    if not np.allclose(frame["t_start"].to_numpy(), basis.edges[:-1], atol=1e-9):
        raise InvalidInputError("control cells do not match the basis breakpoints")
    hhat = np.zeros((basis.n_cells, basis.dim_fbm))
    vprime = np.zeros((basis.n_cells, basis.dim_bm))
    for j in range(basis.dim_fbm):
        hhat[:, j] = frame[f"hhat_{j}"].to_numpy()
    for j in range(basis.dim_bm):
        col = f"vprime_{j}"
        if col in frame:
            vprime[:, j] = frame[col].to_numpy()
    return CameronMartinControl(basis, hhat, vprime)


# ---------------------------------------------------------------------------
# Optimisers
# ---------------------------------------------------------------------------


class _Problem:
    """g(φ) ≥ 0 with cost ½|φ|²; caches finite-difference gradients."""

    def __init__(self, skeleton: SkeletonMap, config: OptimizerConfig) -> None:
        self.skeleton = skeleton
        self.config = config
        basis = skeleton.basis
        lengths = basis.cell_lengths
        self.sqrt_w = np.sqrt(
            np.concatenate([np.repeat(lengths, basis.dim_fbm), np.repeat(lengths, basis.dim_bm)])
        )
        self.size = basis.n_params
        self.evaluations = 0
        self.g0: Optional[float] = None

    def theta(self, phi: Array) -> Array:
        return phi / self.sqrt_w

    def g(self, phi: Array) -> float:
        self.evaluations += 1
        return float(self.skeleton.margins(self.theta(phi)[None])[0])

    def g_and_grad(self, phi: Array) -> tuple[float, Array]:
        h = self.config.fd_step
        probes = np.vstack([phi[None], phi[None] + h * np.eye(self.size)])
        vals = self.skeleton.margins(probes / self.sqrt_w)
        self.evaluations += probes.shape[0]
        return float(vals[0]), (vals[1:] - vals[0]) / h

    def restore(self, direction: Array) -> Optional[float]:
        """Smallest s > 0 with g(s·direction) = 0, or None when none is found."""
        if self.g0 is None:
            self.g0 = self.g(np.zeros(self.size))
        if self.g0 >= 0.0:
            return 0.0
        hi = 1.0
        for _ in range(60):
            if self.g(hi * direction) >= 0.0:
                break
            hi *= 2.0
        else:
            return None
        lo = 0.0 if hi == 1.0 else hi / 2.0
        return float(optimize.brentq(lambda s: self.g(s * direction), lo, hi, xtol=1e-12))


def _trace_row(iteration: int, value: float, violation: float, tau: float, grad: float) -> dict[str, float]:
    return {
        "iteration": iteration,
        "value": value,
        "violation": violation,
        "step": tau,
        "grad_norm": grad,
    }


def _projected(
    problem: _Problem, start: Optional[Array] = None
) -> tuple[Optional[Array], list[dict[str, float]]]:
    """
    Sequential projection onto the linearised constraint, each step pulled
    back to the constraint surface radially.  The first iterate lies on the
    ray of ``start``, or of the constraint gradient at zero.  Returns None
    when no feasible starting point is found.
    """
    cfg = problem.config
    zero = np.zeros(problem.size)
    _, n0 = problem.g_and_grad(zero)
    if start is not None and np.any(start):
        n0 = start
    norm0 = float(np.linalg.norm(n0))
    if norm0 == 0.0:
        return None, []
    s = problem.restore(n0 / norm0)
    if s is None:
        return None, []
    phi = s * n0 / norm0
    best = 0.5 * float(phi @ phi)
    trace = [_trace_row(0, best, 0.0, 1.0, norm0)]
    tau = 1.0
    for it in range(1, cfg.max_iter + 1):
        g, n = problem.g_and_grad(phi)
        nn = float(n @ n)
        if nn == 0.0:
            break
        target = n * (float(n @ phi) - g) / nn
        accepted = False
        while tau >= 1e-6:
            cand = phi + tau * (target - phi)
            norm = float(np.linalg.norm(cand))
            if norm == 0.0:
                tau /= 2.0
                continue
            scale = problem.restore(cand / norm)
            if scale is not None:
                new = scale * cand / norm
                value = 0.5 * float(new @ new)
                if value < best:
                    gain = best - value
                    phi, best, accepted = new, value, True
                    trace.append(_trace_row(it, best, max(0.0, -problem.g(phi)), tau, np.sqrt(nn)))
                    tau = min(1.0, 2.0 * tau)
                    if gain <= cfg.tol * (1.0 + best):
                        return phi, trace
                    break
            tau /= 2.0
        if not accepted:
            break
    return phi, trace


def _penalty(problem: _Problem, start: Array) -> tuple[Array, list[dict[str, float]]]:
    """Quadratic penalty ½|φ|² + μ·max(0, −g)², μ growing until the violation is small."""
    cfg = problem.config
    phi = start.copy()
    mu = cfg.penalty0
    trace: list[dict[str, float]] = []

    for rnd in range(cfg.max_penalty_rounds):

        def objective(x: Array, weight: float = mu) -> tuple[float, Array]:
            g, grad = problem.g_and_grad(x)
            short = max(0.0, -g)
            value = 0.5 * float(x @ x) + weight * short**2
            return value, x - 2.0 * weight * short * grad

        res = optimize.minimize(
            objective, phi, jac=True, method="L-BFGS-B", options={"maxiter": cfg.max_iter, "gtol": cfg.tol}
        )
        phi = np.asarray(res.x, dtype=float)
        violation = max(0.0, -problem.g(phi))
        trace.append(_trace_row(rnd, 0.5 * float(phi @ phi), violation, mu, float(np.linalg.norm(res.jac))))
        logger.debug("penalty round %d: mu=%.3g violation=%.3g", rnd, mu, violation)
        if violation <= cfg.feasibility_tol:
            break
        mu *= cfg.penalty_growth
    return phi, trace


def optimize_rate(
    skeleton: SkeletonMap,
    config: Optional[OptimizerConfig] = None,
    method: Optional[OptimizerMethod | str] = None,
    init: Optional[CameronMartinControl] = None,
) -> RateFunctionResult:
    """
    inf ½‖(ĥ, v′)‖² over controls whose skeleton reaches the event.  An event
    the unperturbed skeleton already reaches has rate zero.  A feasible
    ``init`` bounds the result: the optimiser never returns a dearer control.
    """
    cfg = config or OptimizerConfig()
    chosen = OptimizerMethod(method or cfg.method)
    problem = _Problem(skeleton, cfg)
    basis = skeleton.basis
    zero = np.zeros(problem.size)
    start = None if init is None else init.to_vector() * problem.sqrt_w

    if problem.g(zero) >= 0.0:
        ctrl = CameronMartinControl.zeros(basis)
        logger.info("event reached without control; rate is zero")
        return RateFunctionResult(
            ctrl, 0.0, skeleton.path(ctrl), skeleton.times, True, 0.0, chosen,
            pd.DataFrame([_trace_row(0, 0.0, 0.0, 0.0, 0.0)]),
        )

    phi: Optional[Array] = None
    rows: list[dict[str, float]] = []
    if chosen is OptimizerMethod.PROJECTED:
        phi, rows = _projected(problem, start)
        if phi is None:
            logger.warning("projected optimiser found no feasible start; falling back to penalty")
            chosen = OptimizerMethod.PENALTY
    if chosen is OptimizerMethod.PENALTY or phi is None:
        _, n0 = problem.g_and_grad(zero)
        phi, rows = _penalty(problem, n0 if np.any(n0) else np.ones(problem.size))

    if start is not None and problem.g(start) >= -cfg.feasibility_tol and start @ start < phi @ phi:
        logger.info("initial control is cheaper than the optimiser's; keeping it")
        phi = start
    ctrl = CameronMartinControl.from_vector(basis, problem.theta(phi))
    value, path = rate_value(ctrl, skeleton)
    margin = problem.g(phi)
    violation = max(0.0, -margin)
    feasible = violation <= cfg.feasibility_tol
    if not feasible:
        logger.warning("rate optimiser ended infeasible (violation %.3g)", violation)
    logger.info(
        "rate %.6g with %d cells by %s (%d skeleton solves)",
        value, basis.n_cells, chosen.value, problem.evaluations,
    )
    return RateFunctionResult(
        ctrl,
        value,
        path,
        skeleton.times,
        feasible,
        violation,
        chosen,
        pd.DataFrame(rows),
    )


def rate_function(
    dspec: DeviationSpec, config: DevlabConfig, n_cells: Optional[int] = None
) -> RateFunctionResult:
    basis = build_basis(dspec, config, n_cells)
    return optimize_rate(SkeletonMap.from_spec(dspec, config, basis), config.optimizer)


def refinement_study(
    dspec: DeviationSpec, config: DevlabConfig, factors: tuple[int, ...] = (1, 2), threshold: float = 0.02
) -> pd.DataFrame:
    """Rate at n_cells·factor for each factor, with the relative change to the previous row."""
    rows = []
    previous: Optional[float] = None
    for factor in factors:
        n_cells = config.optimizer.n_cells * factor
        result = rate_function(dspec, config, n_cells)
        change = np.nan if previous is None or previous == 0.0 else abs(result.value - previous) / previous
        rows.append(
            {
                "n_cells": n_cells,
                "rate": result.value,
                "feasible": result.feasible,
                "relative_change": change,
                "stable": bool(change <= threshold) if previous is not None else True,
            }
        )
        previous = result.value
    frame = pd.DataFrame(rows)
    if not frame["stable"].all():
        logger.warning("rate not stable under cell refinement (threshold %.0f%%)", 100 * threshold)
    return frame


# ---------------------------------------------------------------------------
# Oracles
# ---------------------------------------------------------------------------


def additive_rate_oracle(level: float, hurst: float, horizon: float = 1.0, sigma: float = 1.0) -> float:
    """I = a² / (2σ² T^{2H}) for dX = √ε σ db^H and the event X_T ≥ a."""
    return level**2 / (2.0 * sigma**2 * horizon ** (2.0 * hurst))


def scalar_rate_curve(
    skeleton: SkeletonMap, levels: ArrayLike, config: Optional[OptimizerConfig] = None
) -> pd.DataFrame:
    """Rate as a function of the event threshold on a fixed basis."""
    rows = []
    for a in np.asarray(levels, dtype=float):
        res = optimize_rate(skeleton.with_threshold(float(a)), config)
        rows.append({"threshold": float(a), "rate": res.value, "feasible": res.feasible})
    return pd.DataFrame(rows)


__all__ = [
    "SKELETON_SUBSTEPS",
    "SkeletonMap",
    "build_basis",
    "rate_value",
    "RateFunctionResult",
    "skeleton_frame",
    "control_to_frame",
    "control_from_frame",
    "optimize_rate",
    "rate_function",
    "refinement_study",
    "additive_rate_oracle",
    "scalar_rate_curve",
]
