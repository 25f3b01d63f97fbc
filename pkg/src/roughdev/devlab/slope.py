"""
Empirical deviation slope: regress −log p̂(ε) on 1/a(ε) and compare the
slope with the rate from the optimiser.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass
from typing import Any, Optional

import numpy as np
import pandas as pd
import statsmodels.api as sm

from roughdev.core.errors import BudgetExhaustedError, InvalidInputError
from roughdev.core.scenario import HMode, speed
from roughdev.devlab.montecarlo import TailEstimate

logger = logging.getLogger(__name__)

MIN_HITS = 10


@dataclass(frozen=True)
class SlopeCheck:
    slope: float
    stderr: float
    conf_int: tuple[float, float]
    rate: float
    gap: float  # |slope − rate| / rate
    tolerance: float
    truncated: bool
    frame: pd.DataFrame

    @property
    def passed(self) -> bool:
        return self.gap <= self.tolerance

    def summary(self) -> dict[str, Any]:
        return {
            "slope": self.slope,
            "stderr": self.stderr,
            "ci_low": self.conf_int[0],
            "ci_high": self.conf_int[1],
            "rate": self.rate,
            "gap": self.gap,
            "tolerance": self.tolerance,
            "truncated": self.truncated,
            "passed": self.passed,
        }


def _as_frame(estimates: pd.DataFrame | list[TailEstimate]) -> pd.DataFrame:
    if isinstance(estimates, pd.DataFrame):
        return estimates.copy()
    return pd.DataFrame([e.to_row() for e in estimates])


def ldp_slope_check(
    estimates: pd.DataFrame | list[TailEstimate],
    rate: float,
    h_mode: HMode | str = HMode.LDP,
    theta: float = 0.5,
    tolerance: float = 0.15,
    prefactor_exponent: float = 0.5,
    min_hits: int = MIN_HITS,
) -> SlopeCheck:
    """
    Weighted least squares of y = −log p̂ − κ log(1/a(ε)) on [1/a(ε), 1].

    The κ term takes out the polynomial prefactor of the tail, and only
    applies when the rate is positive.  Weights are 1/Var(log p̂) with
    Var(log p̂) ≈ (1 − p)/(n p).  Points with fewer than ``min_hits`` hits
    are dropped.
    """
    frame = _as_frame(estimates)
    if rate < 0.0:
        raise InvalidInputError(f"rate must be non-negative, got {rate}")
    frame["speed"] = [speed(e, h_mode, theta) for e in frame["eps"]]
    frame["inv_speed"] = 1.0 / frame["speed"]
    frame["used"] = frame["hits"] >= min_hits
    dropped = int((~frame["used"]).sum())
    if dropped:
        logger.warning("dropping %d eps values with fewer than %d hits", dropped, min_hits)
    used = frame[frame["used"]]
    if len(used) < 2:
        raise BudgetExhaustedError(
            f"only {len(used)} eps values have at least {min_hits} hits; need 2",
            partial=frame,
        )

    p = used["probability"].to_numpy(dtype=float)
    n = used["runs"].to_numpy(dtype=float)
    x = used["inv_speed"].to_numpy(dtype=float)
    if np.all(p >= 1.0):
        return SlopeCheck(0.0, 0.0, (0.0, 0.0), rate, _gap(0.0, rate), tolerance, dropped > 0, frame)

    kappa = prefactor_exponent if rate > 0.0 else 0.0
    y = -np.log(p) - kappa * np.log(x)
    var = np.maximum((1.0 - p) / (n * p), 1.0 / n**2)
    model = sm.WLS(y, sm.add_constant(x), weights=1.0 / var).fit()
    slope = float(model.params[1])
    if len(used) > 2:
        stderr = float(model.bse[1])
        lo, hi = (float(v) for v in model.conf_int()[1])
    else:
        stderr, lo, hi = float("nan"), float("nan"), float("nan")
    frame.loc[frame["used"], "neg_log_p"] = -np.log(p)
    frame.loc[frame["used"], "fitted"] = model.fittedvalues
    check = SlopeCheck(slope, stderr, (lo, hi), rate, _gap(slope, rate), tolerance, dropped > 0, frame)
    logger.info("slope %.4g against rate %.4g (gap %.1f%%)", slope, rate, 100.0 * check.gap)
    return check


def _gap(slope: float, rate: float) -> float:
    if rate == 0.0:
        return abs(slope)
    return abs(slope - rate) / rate


def slope_from_csv(path: str, rate: float, **kwargs: Any) -> SlopeCheck:
    return ldp_slope_check(pd.read_csv(path), rate, **kwargs)


def required_runs(probability: float, min_hits: int = MIN_HITS, rel_err: Optional[float] = None) -> int:
    """Runs expected to give ``min_hits`` hits, or relative error ``rel_err`` on p̂."""
    if not 0.0 < probability <= 1.0:
        raise InvalidInputError(f"probability must lie in (0, 1], got {probability}")
    runs = min_hits / probability
    if rel_err is not None:
        runs = max(runs, (1.0 - probability) / (probability * rel_err**2))
    return int(np.ceil(runs))


__all__ = ["MIN_HITS", "SlopeCheck", "ldp_slope_check", "slope_from_csv", "required_runs"]
