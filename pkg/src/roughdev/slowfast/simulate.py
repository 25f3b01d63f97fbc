"""
Multiscale simulation of the slow-fast system.

The fast component runs Euler–Maruyama on its Itô form (corrected drift,
1/δ drift scale, 1/√δ noise scale) on a micro grid nested in the macro
grid of the fBM driver.  Across one macro cell the slow state is frozen in
the fast equation; the slow state then takes one level-3 Davie step whose
drift is f averaged over the micro samples of the fast path in that cell.
"""

from __future__ import annotations

import logging
import math
from collections.abc import Sequence
from dataclasses import dataclass
from typing import Optional

import numpy as np
from numpy.typing import ArrayLike

from roughdev.core import SlowFastConfig
from roughdev.core.errors import BlowUpError, InvalidInputError
from roughdev.core.scenario import FastScheme, SimulationMode
from roughdev.gaussian.cameron_martin import CameronMartinControl
from roughdev.gaussian.sampling import ERGODIC_STREAM, FAST_STREAM, trajectory_rng
from roughdev.rough.algebra import Array, Levels, segment_levels
from roughdev.rough.controlled import SmoothFunction4
from roughdev.rough.rde import davie_increment
from roughdev.rough.roughpath import time_adjoined_levels
from roughdev.slowfast.system import Field, SlowFastSpec

logger = logging.getLogger(__name__)


# ---------------------------------------------------------------------------
# Grids and noise
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class FastGrid:
    """Uniform macro grid with ``n_micro`` fast steps per macro cell."""

    times: Array
    n_micro: int
    scheme: FastScheme = FastScheme.ITO
    cap: float = 1e6

    @property
    def n_cells(self) -> int:
        return int(self.times.shape[0] - 1)

    @property
    def macro_step(self) -> float:
        return float(self.times[1] - self.times[0])

    @property
    def dt(self) -> float:
        return self.macro_step / self.n_micro

    @property
    def micro_times(self) -> Array:
        return np.linspace(self.times[0], self.times[-1], self.n_cells * self.n_micro + 1)


def fast_grid(times: ArrayLike, delta: float, config: Optional[SlowFastConfig] = None) -> FastGrid:
    """Micro step min(δ/fast_dt_factor, macro/macro_substeps), snapped to divide the macro step."""
    cfg = config or SlowFastConfig()
    t = np.asarray(times, dtype=float)
    steps = np.diff(t)
    if not np.allclose(steps, steps[0], rtol=1e-9, atol=0.0):
        raise InvalidInputError("the slow-fast simulator needs a uniform macro grid")
    h = float(steps[0])
    target = min(delta / cfg.fast_dt_factor, h / cfg.macro_substeps)
    n_micro = max(1, math.ceil(h / target - 1e-9))
    logger.debug("fast grid: %d micro steps of %.3g per macro cell", n_micro, h / n_micro)
    return FastGrid(t, n_micro, cfg.fast_scheme, cfg.blowup_cap)


class FastNoise:
    """Brownian increments on the micro grid, one generator per trajectory, drawn cell by cell."""

    def __init__(
        self, seed: int, indices: Sequence[int], dim: int, dt: float, stream: int = FAST_STREAM
    ) -> None:
        self._gens = [trajectory_rng(seed, int(i), stream) for i in indices]
        self.dim = dim
        self._sqrt_dt = math.sqrt(dt)

    def draw(self, n: int) -> Array:
        return np.stack([g.standard_normal((n, self.dim)) for g in self._gens]) * self._sqrt_dt


def _check_cap(y: Array, cap: float, where: str) -> None:
    peak = float(np.max(np.abs(y))) if y.size else 0.0
    if not np.isfinite(peak) or peak > cap:
        raise BlowUpError(
            f"fast process exceeded {cap:.3g} {where}; the dissipativity condition "
            "on (F, G) probably fails for this scenario",
            peak=peak,
        )


# ---------------------------------------------------------------------------
# Fast steps
# ---------------------------------------------------------------------------


def _fast_step(
    spec: SlowFastSpec,
    scheme: FastScheme,
    drift_fn: Field,
    x: Array,
    y: Array,
    dt: float,
    dw: Array,
    drift_scale: float,
    noise_scale: float,
    push: Optional[Array] = None,
) -> Array:
    """
    One step of dY = (drift_scale·F*(x, Y) + push·G) dt + noise_scale·G dW.

    F* is F̃ for the Itô scheme and F for the Stratonovich (Heun) scheme;
    ``push`` is a control velocity (B, e) fed through G.
    """

    def parts(state: Array) -> tuple[Array, Array]:
        z = np.concatenate([x, state], axis=-1)
        g = spec.G.value(z)
        a = drift_scale * drift_fn(z)
        if push is not None:
            a = a + np.einsum("...ke,...e->...k", g, push)
        return a, noise_scale * g

    a0, b0 = parts(y)
    noise0 = np.einsum("...ke,...e->...k", b0, dw)
    if scheme is FastScheme.ITO:
        return y + a0 * dt + noise0
    pred = y + a0 * dt + noise0
    a1, b1 = parts(pred)
    return y + 0.5 * (a0 + a1) * dt + 0.5 * (noise0 + np.einsum("...ke,...e->...k", b1, dw))


def _fast_drift(spec: SlowFastSpec, scheme: FastScheme) -> Field:
    return spec.corrected_drift() if scheme is FastScheme.ITO else spec.F.value


def frozen_fast(
    spec: SlowFastSpec,
    x: ArrayLike,
    y0: ArrayLike,
    horizon: float,
    dt: float,
    seed: int = 0,
    indices: Sequence[int] = (0,),
    scheme: FastScheme = FastScheme.ITO,
    cap: float = 1e6,
    stream: int = ERGODIC_STREAM,
) -> tuple[Array, Array]:
    """
    dY = F̃(x, Y) dt + G(x, Y) dw with the slow state frozen at ``x``
    ((m,) shared or (B, m) per trajectory).  Returns (times, Y (B, K+1, n)).
    """
    n_steps = max(1, int(round(horizon / dt)))
    times = np.linspace(0.0, n_steps * dt, n_steps + 1)
    b = len(indices)
    xs = np.broadcast_to(np.asarray(x, dtype=float), (b, spec.m))
    y = np.array(np.broadcast_to(np.asarray(y0, dtype=float), (b, spec.n)))
    noise = FastNoise(seed, indices, spec.e, dt, stream)
    dw = noise.draw(n_steps)
    drift = _fast_drift(spec, scheme)
    out = np.empty((b, n_steps + 1, spec.n))
    out[:, 0] = y
    for k in range(n_steps):
        y = _fast_step(spec, scheme, drift, xs, y, dt, dw[:, k], 1.0, 1.0)
        out[:, k + 1] = y
        if k % 256 == 255:
            _check_cap(y, cap, f"at t={times[k + 1]:.4g} of the frozen equation")
    _check_cap(y, cap, "in the frozen equation")
    return times, out


# ---------------------------------------------------------------------------
# Slow-fast simulation
# ---------------------------------------------------------------------------


class _CellAveragedField:
    """V(x) = [mean_j f(x, y_j) | σ(x)] for fast samples y (B, J, n) of one macro cell."""

    def __init__(self, f: SmoothFunction4, sigma: SmoothFunction4, samples: Array) -> None:
        self.f = f
        self.sigma = sigma
        self.samples = samples
        self.m = sigma.in_dim

    def _averaged(self, order: int, x: Array) -> Array:
        b, j, _ = self.samples.shape
        xs = np.broadcast_to(x[:, None, :], (b, j, self.m))
        d = self.f.derivative(order, np.concatenate([xs, self.samples], axis=-1))
        d = d[(Ellipsis,) + (slice(0, self.m),) * order]
        return np.mean(d, axis=1)

    def value(self, y: Array) -> Array:
        return np.concatenate([self._averaged(0, y)[..., None], self.sigma.value(y)], axis=-1)

    def grad(self, y: Array) -> Array:
        return np.concatenate([self._averaged(1, y)[..., None, :], self.sigma.grad(y)], axis=-2)

    def hess(self, y: Array) -> Array:
        return np.concatenate([self._averaged(2, y)[..., None, :, :], self.sigma.hess(y)], axis=-3)


def control_scales(spec: SlowFastSpec, mode: SimulationMode | str, h: float = 1.0) -> tuple[float, float]:
    """
    (u scale, v scale) of the controlled system.

    controlled-ldp: the dilated driver is shifted by u, the fast equation
    gets (δε)^{-1/2} G v′.  controlled-mdp: shift by √ε h(ε) u, fast term
    h(ε) δ^{-1/2} G v′.
    """
    mode = SimulationMode(mode)
    if mode is SimulationMode.CONTROLLED_LDP:
        return 1.0, 1.0 / math.sqrt(spec.delta * spec.eps)
    if mode is SimulationMode.CONTROLLED_MDP:
        return math.sqrt(spec.eps) * h, h / math.sqrt(spec.delta)
    return 0.0, 0.0


def slow_driver_levels(
    times: Array,
    fbm: Array,
    eps: float,
    ctrl: Optional[CameronMartinControl] = None,
    u_scale: float = 0.0,
) -> Levels:
    """
    Time-adjoined cell levels of T^{u_scale·u}(δ_{√ε} B^H) for a batch of
    sampled fBM paths (B, N+1, d).  The lift is piecewise linear, so the
    translation is the signature of √ε b + u_scale·u.
    """
    inc = math.sqrt(eps) * np.diff(fbm, axis=1)
    if ctrl is not None and u_scale != 0.0:
        if ctrl.basis.times.shape != times.shape or not np.allclose(ctrl.basis.times, times):
            raise InvalidInputError("control basis and driver must share the time grid")
        inc = inc + u_scale * np.diff(ctrl.u_values(), axis=0)[None]
    return time_adjoined_levels(times, segment_levels(inc), True)


@dataclass(frozen=True)
class SlowFastPaths:
    times: Array
    slow: Array  # (B, N+1, m)
    fast: Array  # (B, N+1, n) at macro points
    grid: FastGrid
    mode: SimulationMode = SimulationMode.PLAIN
    fast_micro: Optional[Array] = None  # (B, N·J+1, n)

    @property
    def size(self) -> int:
        return int(self.slow.shape[0])


def simulate_slow_fast(
    spec: SlowFastSpec,
    grid: FastGrid,
    fbm: Array,
    seed: int,
    indices: Sequence[int],
    mode: SimulationMode | str = SimulationMode.PLAIN,
    ctrl: Optional[CameronMartinControl] = None,
    h: float = 1.0,
    keep_micro: bool = False,
) -> SlowFastPaths:
    """
    Simulate a batch of trajectories.  ``fbm`` holds standard fBM values
    (B, N+1, d) on ``grid.times``; the fast noise of trajectory ``i`` comes
    from its own stream, so results do not depend on how runs are batched.
    """
    mode = SimulationMode(mode)
    b, n_points, d = fbm.shape
    if n_points != grid.times.shape[0] or d != spec.d or b != len(indices):
        raise InvalidInputError(
            f"fBM batch {fbm.shape} does not match grid ({grid.times.shape[0]}), "
            f"d={spec.d} and {len(indices)} indices"
        )
    if mode is not SimulationMode.PLAIN and ctrl is None:
        raise InvalidInputError(f"mode {mode.value} needs a control")
    u_scale, v_scale = control_scales(spec, mode, h)
    use_v = ctrl is not None and mode is not SimulationMode.PLAIN and ctrl.basis.dim_bm > 0
    if use_v and ctrl is not None and ctrl.basis.dim_bm != spec.e:
        raise InvalidInputError(f"control has {ctrl.basis.dim_bm} BM components, G has {spec.e}")
    levels = slow_driver_levels(
        grid.times, fbm, spec.eps, ctrl if mode is not SimulationMode.PLAIN else None, u_scale
    )

    n, j_max, dt = grid.n_cells, grid.n_micro, grid.dt
    drift = _fast_drift(spec, grid.scheme)
    noise = FastNoise(seed, indices, spec.e, dt)
    micro_t = grid.micro_times
    drift_scale, noise_scale = 1.0 / spec.delta, 1.0 / math.sqrt(spec.delta)

    x = np.array(np.broadcast_to(spec.x0, (b, spec.m)))
    y = np.array(np.broadcast_to(spec.y0, (b, spec.n)))
    slow = np.empty((b, n + 1, spec.m))
    fast = np.empty((b, n + 1, spec.n))
    slow[:, 0], fast[:, 0] = x, y
    micro = np.empty((b, n * j_max + 1, spec.n)) if keep_micro else None
    if micro is not None:
        micro[:, 0] = y

    for i in range(n):
        dw = noise.draw(j_max)
        samples = np.empty((b, j_max, spec.n))
        for j in range(j_max):
            samples[:, j] = y
            push = None
            if use_v and ctrl is not None:
                push = np.broadcast_to(v_scale * ctrl.vprime_at(micro_t[i * j_max + j]), (b, spec.e))
            y = _fast_step(spec, grid.scheme, drift, x, y, dt, dw[:, j], drift_scale, noise_scale, push)
            if micro is not None:
                micro[:, i * j_max + j + 1] = y
        _check_cap(y, grid.cap, f"at t={grid.times[i + 1]:.4g}")
        field = _CellAveragedField(spec.f, spec.sigma, samples)
        x = x + davie_increment(field, x, levels[0][:, i], levels[1][:, i], levels[2][:, i])
        if not np.all(np.isfinite(x)):
            raise BlowUpError(f"slow component diverged at t={grid.times[i + 1]:.4g}")
        slow[:, i + 1], fast[:, i + 1] = x, y
    return SlowFastPaths(grid.times, slow, fast, grid, mode, micro)


# ---------------------------------------------------------------------------
# Khasminskii auxiliary process
# ---------------------------------------------------------------------------


def breakpoint_cells(delta_block: float, grid: FastGrid) -> int:
    """Largest divisor k of N with k·(macro step) ≤ Δ (at least 1)."""
    n = grid.n_cells
    limit = delta_block / grid.macro_step * (1.0 + 1e-12)
    best = 1
    for k in range(1, n + 1):
        if n % k == 0 and k <= limit:
            best = k
    return best


@dataclass(frozen=True)
class AuxiliaryFast:
    block_cells: int
    block_length: float
    fast: Array  # (B, N+1, n)
    fast_micro: Optional[Array] = None


def auxiliary_fast(
    spec: SlowFastSpec,
    grid: FastGrid,
    slow: Array,
    delta_block: float,
    seed: int,
    indices: Sequence[int],
    keep_micro: bool = True,
) -> AuxiliaryFast:
    """
    Ŷ with the slow argument frozen at the preceding breakpoint t(Δ) = ⌊t/Δ⌋Δ,
    driven by the same Brownian increments as the simulated fast path.
    Δ is snapped down to a whole number of macro cells dividing the horizon.
    """
    k = breakpoint_cells(delta_block, grid)
    logger.debug("Delta=%.4g -> blocks of %d macro cells", delta_block, k)
    b = slow.shape[0]
    n, j_max, dt = grid.n_cells, grid.n_micro, grid.dt
    drift = _fast_drift(spec, grid.scheme)
    noise = FastNoise(seed, indices, spec.e, dt)
    drift_scale, noise_scale = 1.0 / spec.delta, 1.0 / math.sqrt(spec.delta)

    y = np.array(np.broadcast_to(spec.y0, (b, spec.n)))
    fast = np.empty((b, n + 1, spec.n))
    fast[:, 0] = y
    micro = np.empty((b, n * j_max + 1, spec.n)) if keep_micro else None
    if micro is not None:
        micro[:, 0] = y
    for i in range(n):
        dw = noise.draw(j_max)
        x = slow[:, (i // k) * k]
        for j in range(j_max):
            y = _fast_step(spec, grid.scheme, drift, x, y, dt, dw[:, j], drift_scale, noise_scale)
            if micro is not None:
                micro[:, i * j_max + j + 1] = y
        _check_cap(y, grid.cap, f"in the auxiliary process at t={grid.times[i + 1]:.4g}")
        fast[:, i + 1] = y
    return AuxiliaryFast(k, k * grid.macro_step, fast, micro)


__all__ = [
    "FastGrid",
    "fast_grid",
    "FastNoise",
    "frozen_fast",
    "control_scales",
    "slow_driver_levels",
    "SlowFastPaths",
    "simulate_slow_fast",
    "breakpoint_cells",
    "AuxiliaryFast",
    "auxiliary_fast",
]
