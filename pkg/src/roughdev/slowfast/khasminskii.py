"""
Khasminskii decomposition of the averaging error.

With s(Δ) the breakpoint preceding s, the gap between the drift integral of
the slow component and that of the averaged drift splits into

    M₁ = ∫ f(X_s, Y_s) − f(X_{s(Δ)}, Y_s) ds
    M₂ = ∫ f(X_{s(Δ)}, Y_s) − f(X_{s(Δ)}, Ŷ_s) ds
    M₃ = ∫ f(X_{s(Δ)}, Ŷ_s) − f̄(X_{s(Δ)}) ds
    M₄ = ∫ f̄(X_{s(Δ)}) − f̄(X_s) ds

(Q₁..Q₄ for the moderate-deviation controlled system).  The report
estimates E sup|Mᵢ|², E‖M₃‖²_η and ∫E|Y − Ŷ|² over an ε schedule, next to
the shapes of the bounds they obey.
"""

from __future__ import annotations

import logging
import math
from collections.abc import Sequence
from dataclasses import dataclass
from typing import Optional

import numpy as np
import pandas as pd

from roughdev.core import DevlabConfig
from roughdev.core.errors import InvalidInputError
from roughdev.core.scenario import SimulationMode, h_value
from roughdev.gaussian.cameron_martin import CameronMartinBasis, CameronMartinControl
from roughdev.gaussian.sampling import FbmSpec, sample_fbm_batch
from roughdev.rough.algebra import Array
from roughdev.rough.controlled import SmoothFunction4
from roughdev.rough.roughpath import HolderExponents, path_holder_norm
from roughdev.slowfast.averaging import AveragedModel, averaged_path
from roughdev.slowfast.simulate import (
    AuxiliaryFast,
    SlowFastPaths,
    auxiliary_fast,
    fast_grid,
    simulate_slow_fast,
)
from roughdev.slowfast.system import SlowFastSpec

logger = logging.getLogger(__name__)

TERMS = ("1", "2", "3", "4")


# ---------------------------------------------------------------------------
# Block-length schedules and bound shapes
# ---------------------------------------------------------------------------


def delta_ldp(delta: float, beta: float) -> float:
    """Δ = δ^{1/(4β)} log(1/δ)."""
    return delta ** (1.0 / (4.0 * beta)) * math.log(1.0 / delta)


def a_exponent(beta: float) -> float:
    return max(1.0 / (2.0 * beta), 2.0 / (1.0 - 3.0 * beta), 1.0 / (6.0 * beta))


def delta_mdp(eps: float, theta: float, beta: float, kappa: float = 0.01) -> float:
    """Δ = Δ₁^{a(β)} with Δ₁ = ε^{γ+1} h²(ε) |ln ε| and γ = θ − 1/2 − κ."""
    gamma = theta - 0.5 - kappa
    if gamma <= 0.0:
        logger.warning(
            "gamma=%.3g is not positive for theta=%.3g; the block schedule may not vanish",
            gamma,
            theta,
        )
    h = h_value(eps, "mdp", theta)
    d1 = eps ** (gamma + 1.0) * h**2 * abs(math.log(eps))
    return d1 ** a_exponent(beta)


def auxiliary_bound(
    mode: SimulationMode | str, eps: float, delta: float, block: float, beta: float, h: float = 1.0
) -> float:
    """Shape of the ∫E|Y − Ŷ|² bound: √δ/√ε + Δ^{2β}, or δh² + Δ^{2β} for MDP."""
    if SimulationMode(mode) is SimulationMode.CONTROLLED_MDP:
        return delta * h**2 + block ** (2.0 * beta)
    return math.sqrt(delta / eps) + block ** (2.0 * beta)


def m3_bound(block: float, delta: float, eta: float, horizon: float = 1.0) -> float:
    """Δ^{2(1−η)} + Tδ/Δ^{2η}."""
    return block ** (2.0 * (1.0 - eta)) + horizon * delta / block ** (2.0 * eta)


# ---------------------------------------------------------------------------
# Decomposition of one batch
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class DecompositionTerms:
    """Per-trajectory quantities (B,) for one simulated batch."""

    sup_sq: dict[str, Array]
    m3_holder_sq: Array
    gap_integral: Array  # ∫|Y − Ŷ|² dt
    averaging_error: Array  # sup_t |X_t − X̄_t|


def _cumulative(integrand: Array, dt: float) -> Array:
    b = integrand.shape[0]
    flat = integrand.reshape(b, -1, integrand.shape[-1])
    out = np.zeros((b, flat.shape[1] + 1, flat.shape[2]))
    np.cumsum(flat * dt, axis=1, out=out[:, 1:])
    return out


def decomposition_terms(
    spec: SlowFastSpec,
    paths: SlowFastPaths,
    aux: AuxiliaryFast,
    bar_f: SmoothFunction4,
    eta: float,
    limit: Optional[Array] = None,
) -> DecompositionTerms:
    """
    Evaluate M₁..M₄ at micro resolution.  The slow path is linear between
    macro points; the fast paths are taken at the left point of each micro step.
    """
    if paths.fast_micro is None or aux.fast_micro is None:
        raise InvalidInputError("the decomposition needs micro-resolution fast paths")
    grid = paths.grid
    b, n, j = paths.size, grid.n_cells, grid.n_micro
    shape = (b, n, j)
    frac = (np.arange(j) / j)[None, None, :, None]
    left, right = paths.slow[:, :-1, None, :], paths.slow[:, 1:, None, :]
    x_s = left + frac * (right - left)
    block = (np.arange(n) // aux.block_cells) * aux.block_cells
    x_b = np.broadcast_to(paths.slow[:, block, None, :], shape + (spec.m,))
    y = paths.fast_micro[:, :-1].reshape(shape + (spec.n,))
    y_hat = aux.fast_micro[:, :-1].reshape(shape + (spec.n,))

    f = spec.f.value
    f_xs_y = f(spec.joint(x_s, y))
    f_xb_y = f(spec.joint(x_b, y))
    f_xb_yhat = f(spec.joint(x_b, y_hat))
    fbar_xb = bar_f.value(x_b)
    fbar_xs = bar_f.value(x_s)
    integrands = {
        "1": f_xs_y - f_xb_y,
        "2": f_xb_y - f_xb_yhat,
        "3": f_xb_yhat - fbar_xb,
        "4": fbar_xb - fbar_xs,
    }
    dt = grid.dt
    sup_sq = {}
    m3_macro = None
    for key, integrand in integrands.items():
        cum = _cumulative(integrand, dt)
        sup_sq[key] = np.max(np.sum(cum**2, axis=-1), axis=1)
        if key == "3":
            m3_macro = cum[:, ::j]
    assert m3_macro is not None
    holder = path_holder_norm(grid.times, m3_macro, eta, include_start=False)
    gap = np.sum((y - y_hat) ** 2, axis=(1, 2, 3)) * dt
    if limit is None:
        err = np.zeros(b)
    else:
        err = np.max(np.linalg.norm(paths.slow - limit[None], axis=-1), axis=1)
    return DecompositionTerms(sup_sq, np.asarray(holder) ** 2, gap, err)


# ---------------------------------------------------------------------------
# Report over an ε schedule
# ---------------------------------------------------------------------------


def _block_length(
    config: DevlabConfig, mode: SimulationMode, eps: float, delta: float, beta: float
) -> float:
    sf, horizon = config.slow_fast, config.gaussian.horizon
    if sf.Delta is not None:
        block = sf.Delta
    elif mode is SimulationMode.CONTROLLED_MDP:
        block = delta_mdp(eps, config.deviation.theta, beta, config.gaussian.kappa)
    else:
        block = delta_ldp(delta, beta)
    if block > horizon:
        logger.warning("Delta=%.3g exceeds the horizon; using a single block", block)
        block = horizon
    return block


def _zero_control(config: DevlabConfig, spec: SlowFastSpec, times: Array) -> CameronMartinControl:
    opt = config.optimizer
    basis = CameronMartinBasis.build(
        config.gaussian.hurst, times, opt.n_cells, spec.d, spec.e, opt.kernel, opt.cell_layout
    )
    return CameronMartinControl.zeros(basis)


def khasminskii_report(
    spec: SlowFastSpec,
    config: DevlabConfig,
    eps_schedule: Optional[Sequence[float]] = None,
    n_runs: int = 200,
    mode: SimulationMode | str = SimulationMode.PLAIN,
    ctrl: Optional[CameronMartinControl] = None,
) -> pd.DataFrame:
    """
    One row per ε with δ = delta_scale·ε^{delta_power}: the block length Δ,
    E sup|Mᵢ|² (columns ``M1``..``M4``, or ``Q1``..``Q4`` in the
    moderate-deviation mode), E‖M₃‖²_η, ∫E|Y − Ŷ|², E sup|X − X̄| and the
    bound shapes.
    """
    mode = SimulationMode(mode)
    dev, gauss, sf = config.deviation, config.gaussian, config.slow_fast
    schedule = list(eps_schedule if eps_schedule is not None else dev.eps_schedule)
    beta = HolderExponents.for_hurst(gauss.hurst, gauss.kappa).beta
    prefix = "Q" if mode is SimulationMode.CONTROLLED_MDP else "M"
    fbm_spec = FbmSpec(
        hurst=gauss.hurst,
        dim=spec.d,
        n_steps=gauss.n_steps,
        horizon=gauss.horizon,
        test_mode=gauss.test_mode,
        cholesky_max=gauss.cholesky_max,
    )
    times = fbm_spec.times
    chunk = config.monte_carlo.chunk_size
    rows = []
    for eps in schedule:
        delta = dev.delta_scale * eps**dev.delta_power
        scaled = spec.with_scales(eps, delta)
        h = h_value(eps, "mdp", dev.theta) if mode is SimulationMode.CONTROLLED_MDP else 1.0
        block = _block_length(config, mode, eps, delta, beta)
        grid = fast_grid(times, delta, sf)
        bar_f = AveragedModel(scaled, sf, config.seed).function()
        limit = averaged_path(bar_f, scaled.x0, times)
        control = ctrl
        if mode is not SimulationMode.PLAIN and control is None:
            control = _zero_control(config, scaled, times)

        parts: list[DecompositionTerms] = []
        block_cells = 1
        for start in range(0, n_runs, chunk):
            idx = list(range(start, min(start + chunk, n_runs)))
            fbm = sample_fbm_batch(fbm_spec, config.seed, idx)
            paths = simulate_slow_fast(
                scaled, grid, fbm, config.seed, idx, mode, control, h, keep_micro=True
            )
            aux = auxiliary_fast(scaled, grid, paths.slow, block, config.seed, idx)
            block_cells = aux.block_cells
            parts.append(decomposition_terms(scaled, paths, aux, bar_f, sf.eta, limit))

        row: dict[str, float] = {
            "eps": eps,
            "delta": delta,
            "Delta": block_cells * grid.macro_step,
            "runs": n_runs,
        }
        for key in TERMS:
            values = np.concatenate([p.sup_sq[key] for p in parts])
            row[f"{prefix}{key}"] = float(np.mean(values))
            row[f"{prefix}{key}_stderr"] = float(np.std(values, ddof=1) / math.sqrt(n_runs))
        holder = np.concatenate([p.m3_holder_sq for p in parts])
        gap = np.concatenate([p.gap_integral for p in parts])
        err = np.concatenate([p.averaging_error for p in parts])
        row[f"{prefix}3_holder"] = float(np.mean(holder))
        row["aux_gap"] = float(np.mean(gap))
        row["aux_gap_stderr"] = float(np.std(gap, ddof=1) / math.sqrt(n_runs))
        row["averaging_error"] = float(np.mean(err))
        row["averaging_error_stderr"] = float(np.std(err, ddof=1) / math.sqrt(n_runs))
        row["aux_bound_shape"] = auxiliary_bound(mode, eps, delta, row["Delta"], beta, h)
        row["m3_bound_shape"] = m3_bound(row["Delta"], delta, sf.eta, gauss.horizon)
        logger.info(
            "eps=%.4g delta=%.3g Delta=%.3g: aux gap %.3g, averaging error %.3g",
            eps,
            delta,
            row["Delta"],
            row["aux_gap"],
            row["averaging_error"],
        )
        rows.append(row)
    return pd.DataFrame(rows)


def auxiliary_gap_table(
    spec: SlowFastSpec,
    config: DevlabConfig,
    blocks: Sequence[float],
    n_runs: int = 100,
) -> pd.DataFrame:
    """
    ∫E|Y − Ŷ|² for several block lengths Δ at the scales of ``spec``, all
    against the same simulated slow-fast trajectories.
    """
    gauss, sf = config.gaussian, config.slow_fast
    fbm_spec = FbmSpec(
        hurst=gauss.hurst,
        dim=spec.d,
        n_steps=gauss.n_steps,
        horizon=gauss.horizon,
        test_mode=gauss.test_mode,
        cholesky_max=gauss.cholesky_max,
    )
    grid = fast_grid(fbm_spec.times, spec.delta, sf)
    idx = list(range(n_runs))
    fbm = sample_fbm_batch(fbm_spec, config.seed, idx)
    paths = simulate_slow_fast(spec, grid, fbm, config.seed, idx, keep_micro=True)
    assert paths.fast_micro is not None
    rows = []
    for block in blocks:
        aux = auxiliary_fast(spec, grid, paths.slow, block, config.seed, idx)
        assert aux.fast_micro is not None
        gap = np.sum((paths.fast_micro[:, :-1] - aux.fast_micro[:, :-1]) ** 2, axis=(1, 2)) * grid.dt
        rows.append(
            {
                "Delta": aux.block_length,
                "block_cells": aux.block_cells,
                "aux_gap": float(np.mean(gap)),
                "aux_gap_stderr": float(np.std(gap, ddof=1) / math.sqrt(n_runs)),
            }
        )
    return pd.DataFrame(rows)


__all__ = [
    "TERMS",
    "delta_ldp",
    "a_exponent",
    "delta_mdp",
    "auxiliary_bound",
    "m3_bound",
    "DecompositionTerms",
    "decomposition_terms",
    "khasminskii_report",
    "auxiliary_gap_table",
]
