"""
Monte Carlo tail probabilities of rare events, chunked and optionally fanned
out over worker threads.  Trajectory i always draws from its own random
streams, so estimates do not depend on chunk size or worker count.
"""

from __future__ import annotations

import asyncio
import logging
from collections.abc import Sequence
from dataclasses import asdict, dataclass
from typing import Any, Callable, Optional, TypeVar

import numpy as np
import pandas as pd
from numpy.typing import ArrayLike
from scipy.stats import norm
from statsmodels.stats.proportion import proportion_confint

from roughdev.core import DevlabConfig
from roughdev.core.budget import Budget
from roughdev.core.errors import BudgetExhaustedError
from roughdev.core.scenario import HMode
from roughdev.devlab.deviation import (
    DeviationSpec,
    event_reference,
    event_value,
    fbm_spec_for,
    limit_path,
    observable,
    simulate_batch,
    terminal_std,
)
from roughdev.rough.algebra import Array

logger = logging.getLogger(__name__)

T = TypeVar("T")


# ---------------------------------------------------------------------------
# Chunked execution
# ---------------------------------------------------------------------------


def pairwise_sum(values: ArrayLike) -> float:
    """Sum by recursive halving; the result depends only on the order of ``values``."""
    v = np.asarray(values, dtype=float).ravel()
    if v.size == 0:
        return 0.0
    while v.size > 1:
        if v.size % 2:
            v = np.append(v, 0.0)
        v = v[0::2] + v[1::2]
    return float(v[0])


def chunk_indices(n_runs: int, chunk_size: int, start: int = 0) -> list[list[int]]:
    return [
        list(range(lo, min(lo + chunk_size, start + n_runs)))
        for lo in range(start, start + n_runs, chunk_size)
    ]


async def _fan_out(fn: Callable[[list[int]], T], chunks: Sequence[list[int]], workers: int) -> list[T]:
    gate = asyncio.Semaphore(workers)

    async def one(chunk: list[int]) -> T:
        async with gate:
            return await asyncio.to_thread(fn, chunk)

    return list(await asyncio.gather(*(one(c) for c in chunks)))


def run_chunks(fn: Callable[[list[int]], T], chunks: Sequence[list[int]], workers: int = 1) -> list[T]:
    """Apply ``fn`` to every chunk; results come back in chunk order."""
    if workers <= 1 or len(chunks) <= 1:
        return [fn(c) for c in chunks]
    return asyncio.run(_fan_out(fn, chunks, workers))


# ---------------------------------------------------------------------------
# Event sampling
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class TailEstimate:
    eps: float
    threshold: float
    runs: int
    hits: int
    probability: float
    ci_low: float
    ci_high: float
    confidence: float
    upper_bound_only: bool = False

    def to_row(self) -> dict[str, Any]:
        return asdict(self)


def interval(hits: int, runs: int, confidence: float = 0.95) -> tuple[float, float, bool]:
    """
    Wilson interval for hits/runs.  With no hits only the one-sided bound
    1 − (1 − c)^{1/n} is reported.
    """
    if hits == 0:
        return 0.0, 1.0 - (1.0 - confidence) ** (1.0 / runs), True
    lo, hi = proportion_confint(hits, runs, alpha=1.0 - confidence, method="wilson")
    return float(lo), float(hi), False


def make_estimate(eps: float, threshold: float, hits: int, runs: int, confidence: float) -> TailEstimate:
    lo, hi, upper_only = interval(hits, runs, confidence)
    if upper_only:
        logger.warning("no hits in %d runs at eps=%.4g; reporting an upper bound only", runs, eps)
    return TailEstimate(eps, threshold, runs, hits, hits / runs, lo, hi, confidence, upper_only)


class EventSampler:
    """φ(observable) for batches of trajectory indices at a fixed ε."""

    def __init__(self, dspec: DeviationSpec, config: DevlabConfig, eps: float) -> None:
        self.dspec = dspec
        self.config = config
        self.eps = eps
        times = fbm_spec_for(config, 1).times
        self.limit = limit_path(dspec, config, times)
        self.reference = event_reference(dspec, self.limit)

    def values(self, indices: list[int]) -> Array:
        _, paths = simulate_batch(self.dspec, self.config, self.eps, self.config.seed, indices)
        obs = observable(self.dspec, self.eps, paths, self.limit)
        return event_value(obs, self.dspec.event, self.reference)

    def terminal(self, indices: list[int]) -> Array:
        """Observable at T, all components: (B, m)."""
        _, paths = simulate_batch(self.dspec, self.config, self.eps, self.config.seed, indices)
        return observable(self.dspec, self.eps, paths, self.limit)[:, -1]


def mc_event_values(
    dspec: DeviationSpec, config: DevlabConfig, eps: float, n_runs: int, start: int = 0
) -> Array:
    mc = config.monte_carlo
    sampler = EventSampler(dspec, config, eps)
    parts = run_chunks(sampler.values, chunk_indices(n_runs, mc.chunk_size, start), mc.workers)
    return np.concatenate(parts)


def tail_estimate(
    dspec: DeviationSpec,
    config: DevlabConfig,
    eps: float,
    n_runs: Optional[int] = None,
    budget: Optional[Budget] = None,
) -> TailEstimate:
    """
    P(φ ≥ a) at scale ε.  When ``budget`` cannot cover every run, the runs it
    allows are made and BudgetExhaustedError carries their estimate.
    """
    mc = config.monte_carlo
    wanted = n_runs or mc.n_runs
    planned = wanted
    if budget is not None and budget.remaining is not None:
        planned = min(wanted, budget.remaining)
    if planned == 0:
        raise BudgetExhaustedError(f"no Monte Carlo runs left for eps={eps}", partial=None, eps=eps)

    values = mc_event_values(dspec, config, eps, planned)
    hits = int(pairwise_sum(values >= dspec.event.threshold))
    if budget is not None:
        budget.consume(planned)
    estimate = make_estimate(eps, dspec.event.threshold, hits, planned, mc.confidence)
    logger.info("eps=%.4g: %d/%d hits, p=%.4g", eps, hits, planned, estimate.probability)
    if planned < wanted:
        raise BudgetExhaustedError(
            f"run budget allowed {planned} of {wanted} runs at eps={eps}",
            partial=estimate,
            eps=eps,
            runs=planned,
        )
    return estimate


def tail_sweep(
    dspec: DeviationSpec,
    config: DevlabConfig,
    eps_schedule: Optional[Sequence[float]] = None,
    n_runs: Optional[int] = None,
    budget: Optional[Budget] = None,
) -> pd.DataFrame:
    """One tail estimate per ε; a budget stop re-raises with the rows computed so far."""
    rows: list[dict[str, Any]] = []
    for eps in eps_schedule or dspec.eps_schedule:
        try:
            rows.append(tail_estimate(dspec, config, eps, n_runs, budget).to_row())
        except BudgetExhaustedError as exc:
            if isinstance(exc.partial, TailEstimate):
                rows.append(exc.partial.to_row())
            raise BudgetExhaustedError(exc.message, partial=pd.DataFrame(rows), **exc.details) from exc
    return pd.DataFrame(rows)


def observable_moments(
    dspec: DeviationSpec, config: DevlabConfig, eps: float, n_runs: int, component: int = 0
) -> dict[str, float]:
    """Sample mean and variance of the observable at T, with the variance's standard error."""
    mc = config.monte_carlo
    sampler = EventSampler(dspec, config, eps)
    parts = run_chunks(sampler.terminal, chunk_indices(n_runs, mc.chunk_size), mc.workers)
    x = np.concatenate(parts)[:, component]
    mean = pairwise_sum(x) / n_runs
    centred = (x - mean) ** 2
    var = pairwise_sum(centred) / (n_runs - 1)
    var_stderr = float(np.std(centred, ddof=1)) / np.sqrt(n_runs)
    return {"mean": mean, "variance": var, "variance_stderr": var_stderr, "runs": float(n_runs)}


# ---------------------------------------------------------------------------
# Oracle
# ---------------------------------------------------------------------------


def gaussian_tail_oracle(
    threshold: float,
    eps: float,
    h_mode: HMode | str,
    hurst: float,
    horizon: float = 1.0,
    sigma: float = 1.0,
    theta: float = 0.5,
) -> float:
    """P(obs_T ≥ a) for dX = √ε σ db^H, X_0 = 0."""
    std = terminal_std(eps, h_mode, hurst, horizon, sigma, theta)
    return float(norm.sf(threshold / std))


__all__ = [
    "pairwise_sum",
    "chunk_indices",
    "run_chunks",
    "TailEstimate",
    "interval",
    "make_estimate",
    "EventSampler",
    "mc_event_values",
    "tail_estimate",
    "tail_sweep",
    "observable_moments",
    "gaussian_tail_oracle",
]
