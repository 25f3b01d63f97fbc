"""
Averaged drift f̄(x) = ∫ f(x, y) μ^x(dy) from ergodic averages of the frozen
fast process, with batch-means error bars, an exponential-ergodicity fit
and the averaged ODE.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass
from typing import Optional

import numpy as np
import pandas as pd
import statsmodels.api as sm
from numpy.typing import ArrayLike
from scipy.interpolate import CubicSpline

from roughdev.core import SlowFastConfig
from roughdev.core.errors import InvalidInputError
from roughdev.rough.algebra import Array
from roughdev.rough.controlled import Derivative, SmoothFunction4
from roughdev.rough.rde import rk4_path
from roughdev.slowfast.simulate import frozen_fast
from roughdev.slowfast.system import SlowFastSpec

logger = logging.getLogger(__name__)


# ---------------------------------------------------------------------------
# Ergodic averages
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class BarFEstimate:
    x: Array  # (K, m)
    value: Array  # (K, m)
    stderr: Array  # (K, m)
    n_batches: int
    flagged: Array  # (K,) batch means drift between halves; stderr widened
    exact: Array  # (K,) f did not vary along the trajectory


def estimate_bar_f(
    spec: SlowFastSpec,
    x: ArrayLike,
    config: Optional[SlowFastConfig] = None,
    seed: int = 0,
    index: int = 0,
    horizon: Optional[float] = None,
) -> BarFEstimate:
    """
    Time average of f(x, Y_s) along the frozen fast process after burn-in.

    Every x in a batch (K, m) shares the Brownian path of ``index``
    (common random numbers), so differences across x are not blurred by
    independent noise.
    """
    cfg = config or SlowFastConfig()
    xs = np.atleast_2d(np.asarray(x, dtype=float))
    if xs.shape[-1] != spec.m:
        raise InvalidInputError(f"x has dimension {xs.shape[-1]}, the slow state {spec.m}")
    span = cfg.ergodic_horizon if horizon is None else horizon
    _, ys = frozen_fast(
        spec,
        xs,
        spec.y0,
        cfg.ergodic_burn_in + span,
        cfg.ergodic_dt,
        seed,
        [index] * xs.shape[0],
        cfg.fast_scheme,
        cfg.blowup_cap,
    )
    start = int(round(cfg.ergodic_burn_in / cfg.ergodic_dt))
    tail = ys[:, start:-1]
    vals = spec.f.value(spec.joint(xs[:, None, :], tail))  # (K, L, m)
    nb = cfg.ergodic_batches
    per = vals.shape[1] // nb
    if per < 1:
        raise InvalidInputError(f"{vals.shape[1]} samples cannot fill {nb} batches")
    means = vals[:, : nb * per].reshape(xs.shape[0], nb, per, spec.m).mean(axis=2)
    value = means.mean(axis=1)
    stderr = means.std(axis=1, ddof=1) / np.sqrt(nb)

    exact = np.all(vals == vals[:, :1], axis=(1, 2))
    value = np.where(exact[:, None], vals[:, 0], value)
    stderr = np.where(exact[:, None], 0.0, stderr)

    half = nb // 2
    drift = np.abs(means[:, :half].mean(axis=1) - means[:, half:].mean(axis=1))
    flagged = np.any(drift > 6.0 * np.maximum(stderr, 1e-300), axis=1) & ~exact
    if np.any(flagged):
        logger.warning(
            "batch means drift at %d of %d slow states; error bars doubled",
            int(np.sum(flagged)),
            xs.shape[0],
        )
        stderr = np.where(flagged[:, None], 2.0 * stderr, stderr)
    return BarFEstimate(xs, value, stderr, nb, flagged, exact)


@dataclass(frozen=True)
class DecayFit:
    rate: float
    stderr: float
    beta1: float
    frame: pd.DataFrame  # t, mean_sq_gap

    @property
    def consistent(self) -> bool:
        """The fitted contraction is at least β₁ (within three standard errors)."""
        return self.rate + 3.0 * self.stderr >= self.beta1


def ergodic_decay_rate(
    spec: SlowFastSpec,
    x: ArrayLike,
    y_pair: tuple[ArrayLike, ArrayLike],
    horizon: float = 5.0,
    dt: float = 0.01,
    n_paths: int = 64,
    seed: int = 0,
) -> DecayFit:
    """
    Couple two frozen trajectories from y₁ and y₂ through the same noise and
    fit log E|Y¹_t − Y²_t|² ≈ c − rate·t by least squares.
    """
    indices = list(range(n_paths))
    times, a = frozen_fast(spec, x, y_pair[0], horizon, dt, seed, indices)
    _, b = frozen_fast(spec, x, y_pair[1], horizon, dt, seed, indices)
    gap = np.mean(np.sum((a - b) ** 2, axis=-1), axis=0)
    keep = gap > gap[0] * 1e-24
    if np.sum(keep) < 3:
        raise InvalidInputError("trajectories merge too fast to fit a decay rate")
    model = sm.OLS(np.log(gap[keep]), sm.add_constant(times[keep])).fit()
    rate, err = -float(model.params[1]), float(model.bse[1])
    frame = pd.DataFrame({"t": times, "mean_sq_gap": gap})
    fit = DecayFit(rate, err, spec.assumptions.beta1, frame)
    if not fit.consistent:
        logger.warning("fitted decay rate %.3g below beta1=%.3g", rate, spec.assumptions.beta1)
    return fit


def second_moment_band(
    spec: SlowFastSpec,
    x: ArrayLike,
    y0: ArrayLike,
    horizon: float = 5.0,
    dt: float = 0.01,
    n_paths: int = 256,
    seed: int = 0,
) -> pd.DataFrame:
    """E|Y_t|² of the frozen process against e^{−β₂t}|Y₀|² + C(1 + |x|²)/β₂."""
    times, ys = frozen_fast(spec, x, y0, horizon, dt, seed, list(range(n_paths)))
    sq = np.sum(ys**2, axis=-1)
    moment = sq.mean(axis=0)
    err = sq.std(axis=0, ddof=1) / np.sqrt(n_paths)
    a = spec.assumptions
    x_sq = float(np.sum(np.asarray(x, dtype=float) ** 2))
    y_sq = float(np.sum(np.asarray(y0, dtype=float) ** 2))
    band = np.exp(-a.beta2 * times) * y_sq + a.growth_c * (1.0 + x_sq) / a.beta2
    return pd.DataFrame(
        {
            "t": times,
            "second_moment": moment,
            "stderr": err,
            "band": band,
            "within": moment <= band + 3.0 * err,
        }
    )


# ---------------------------------------------------------------------------
# Averaged model
# ---------------------------------------------------------------------------


def _spline_function(spline: CubicSpline) -> SmoothFunction4:
    def order(k: int) -> Derivative:
        def fn(z: Array) -> Array:
            z = np.asarray(z, dtype=float)
            out = spline(z[..., 0], k) if k < 4 else np.zeros(z.shape[:-1])
            return np.asarray(out)[(...,) + (None,) * (k + 1)]

        return fn

    return SmoothFunction4(
        1, (1,), order(0), order(1), order(2), order(3), order(4), name="tabulated-bar-f", exact=False
    )


class AveragedModel:
    """
    f̄ from the closed form attached to the scenario, or from cached ergodic
    estimates; with m = 1 the estimates are tabulated on a grid and joined
    by a cubic spline.
    """

    def __init__(
        self, spec: SlowFastSpec, config: Optional[SlowFastConfig] = None, seed: int = 0
    ) -> None:
        self.spec = spec
        self.config = config or SlowFastConfig()
        self.seed = seed
        self._cache: dict[tuple[float, ...], tuple[Array, Array]] = {}
        self._table: Optional[tuple[Array, Array, Array]] = None
        self._function: Optional[SmoothFunction4] = spec.bar_f

    @property
    def analytic(self) -> bool:
        return self.spec.bar_f is not None

    @staticmethod
    def _key(x: Array) -> tuple[float, ...]:
        return tuple(round(float(v), 12) for v in x)

    def estimate(self, x: ArrayLike) -> tuple[Array, Array]:
        """(value, stderr) at one slow state, cached per state."""
        xv = np.atleast_1d(np.asarray(x, dtype=float))
        key = self._key(xv)
        if key not in self._cache:
            est = estimate_bar_f(self.spec, xv, self.config, self.seed)
            self._cache[key] = (est.value[0], est.stderr[0])
        return self._cache[key]

    def bar_f(self, x: ArrayLike) -> Array:
        if self._function is not None:
            return self._function.value(np.atleast_1d(np.asarray(x, dtype=float)))
        return self.estimate(x)[0]

    def tabulate(self, lo: float, hi: float, n_points: int = 33) -> SmoothFunction4:
        if self.spec.m != 1:
            raise InvalidInputError(
                "tabulated averaging needs a scalar slow state; attach bar_f to the scenario"
            )
        grid = np.linspace(lo, hi, n_points)
        est = estimate_bar_f(self.spec, grid[:, None], self.config, self.seed)
        for k, x in enumerate(grid):
            self._cache[self._key(np.array([x]))] = (est.value[k], est.stderr[k])
        self._table = (grid, est.value[:, 0], est.stderr[:, 0])
        self._function = _spline_function(CubicSpline(grid, est.value[:, 0]))
        logger.info("tabulated bar_f on [%.3g, %.3g] at %d points", lo, hi, n_points)
        return self._function

    def function(self, center: Optional[float] = None, n_points: int = 33) -> SmoothFunction4:
        """f̄ as a smooth function: the closed form, else a table around ``center``."""
        if self._function is not None:
            return self._function
        c = float(self.spec.x0[0]) if center is None else center
        r = self.config.dissipativity_radius
        return self.tabulate(c - r, c + r, n_points)

    @property
    def table(self) -> Optional[pd.DataFrame]:
        if self._table is None:
            return None
        grid, value, err = self._table
        return pd.DataFrame({"x": grid, "bar_f": value, "stderr": err})

    def lip_estimate(self, points: Optional[ArrayLike] = None) -> float:
        """Largest |f̄(x₁) − f̄(x₂)| / |x₁ − x₂| over neighbouring sample states."""
        if points is not None:
            raw = np.asarray(points, dtype=float)
            pts = raw.reshape(raw.shape[0], -1)
        elif self._table is not None:
            pts = self._table[0][:, None]
        else:
            offsets = np.linspace(-1.0, 1.0, 9)[:, None] * np.ones(self.spec.m)
            pts = self.spec.x0 + offsets * self.config.dissipativity_radius / 5.0
        vals = np.stack([self.bar_f(p) for p in pts])
        dx = np.linalg.norm(np.diff(pts, axis=0), axis=-1)
        dv = np.linalg.norm(np.diff(vals, axis=0), axis=-1)
        return float(np.max(dv / dx))

    def lipschitz_ok(self, slack: float = 0.1) -> bool:
        lip = self.lip_estimate()
        ok = lip <= self.spec.assumptions.lipschitz * (1.0 + slack)
        if not ok:
            logger.warning(
                "bar_f Lipschitz estimate %.3g exceeds L=%.3g", lip, self.spec.assumptions.lipschitz
            )
        return ok


def averaged_path(bar_f: SmoothFunction4, x0: ArrayLike, times: ArrayLike) -> Array:
    """Solution of dX̄ = f̄(X̄) dt on ``times`` by RK4."""
    return rk4_path(bar_f.value, np.atleast_1d(np.asarray(x0, dtype=float)), times)


__all__ = [
    "BarFEstimate",
    "estimate_bar_f",
    "DecayFit",
    "ergodic_decay_rate",
    "second_moment_band",
    "AveragedModel",
    "averaged_path",
]
