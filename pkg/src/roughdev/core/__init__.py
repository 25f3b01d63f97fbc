"""
Core configuration and utilities for roughdev.

Provides:
- Path constants (ROUGHDEV_HOME, ROUGHDEV_RUNS_DIR, ROUGHDEV_CONFIG_FILE)
- Configuration models (GaussianConfig, SolverConfig, ..., DevlabConfig)
- Config loading/saving and hashing
"""

from __future__ import annotations

import hashlib
import json
from pathlib import Path
from typing import Any, Optional

import yaml
from pydantic import BaseModel, ConfigDict, Field, ValidationError, model_validator

from roughdev.core.errors import InvalidInputError
from roughdev.core.scenario import (
    CellLayout,
    CoefficientSpec,
    EventSpec,
    FastScheme,
    HMode,
    KernelKind,
    LiftMode,
    OptimizerMethod,
    PairMode,
    ProblemKind,
    RemainderVariant,
    StepRule,
)


# ---------------------------------------------------------------------------
# Path constants
# ---------------------------------------------------------------------------

ROUGHDEV_HOME: Path = Path.home() / ".roughdev"
ROUGHDEV_RUNS_DIR: Path = Path("devlab-runs")
ROUGHDEV_CONFIG_FILE: Path = ROUGHDEV_HOME / "config.yaml"


# ---------------------------------------------------------------------------
# Configuration models
# ---------------------------------------------------------------------------


class _Section(BaseModel):
    model_config = ConfigDict(extra="forbid", use_enum_values=False)


class GaussianConfig(_Section):
    """Driving noise: fBM of dimension ``dim_fbm`` plus an independent BM."""

    hurst: float = 0.3
    dim_fbm: int = Field(default=1, ge=1)
    dim_bm: int = Field(default=0, ge=0)
    n_steps: int = Field(default=256, ge=2)
    horizon: float = Field(default=1.0, gt=0.0)
    lift_mode: LiftMode = LiftMode.GEOMETRIC
    test_mode: bool = False  # admits hurst = 1/2
    kappa: float = Field(default=0.01, gt=0.0)
    cholesky_max: int = Field(default=4096, ge=2)

    @model_validator(mode="after")
    def _check_hurst(self) -> "GaussianConfig":
        if self.test_mode and self.hurst == 0.5:
            return self
        if not 0.25 < self.hurst < 1.0 / 3.0:
            raise ValueError(
                f"hurst={self.hurst} outside (1/4, 1/3); set test_mode for hurst=1/2"
            )
        return self


class SolverConfig(_Section):
    """Rough solver: local-existence constants, Picard tolerances, budgets."""

    c_beta: float = Field(default=4.01, gt=0.0)
    nu_hat: float = Field(default=2.01, gt=0.0)
    tol: float = Field(default=1e-10, gt=0.0)
    max_picard: int = Field(default=50, ge=1)
    max_subintervals: Optional[int] = Field(default=None, ge=1)
    step_rule: StepRule = StepRule.LAMBDA
    fixed_cells: int = Field(default=1, ge=1)
    remainder_variant: RemainderVariant = RemainderVariant.LEFT
    holder_pairs: PairMode = PairMode.AUTO
    dyadic_threshold: int = Field(default=4096, ge=2)


class YoungConfig(_Section):
    """Young (skeleton) solver: Euler refinement with Richardson extrapolation."""

    tol: float = Field(default=1e-6, gt=0.0)
    max_refinements: int = Field(default=8, ge=1)
    q_divergence_ratio: float = Field(default=1.5, gt=1.0)
    check_q_variation: bool = True
    # one Richardson pair at this many substeps per cell instead of refining to tol;
    # the solution is then a smooth function of the driver
    fixed_substeps: Optional[int] = Field(default=None, ge=1)


class SingleScaleConfig(_Section):
    """dX = f(X) dt + sqrt(eps) [sigma_1 | sigma_2](X) d(b^H, w)."""

    drift: CoefficientSpec = Field(default_factory=CoefficientSpec)
    sigma: CoefficientSpec = Field(
        default_factory=lambda: CoefficientSpec(kind="constant", params={"value": 1.0})
    )
    x0: list[float] = Field(default_factory=lambda: [0.0])


class SlowFastConfig(_Section):
    """Slow variable driven by fBM, fast variable by an ergodic SDE."""

    eps: float = Field(default=0.1, gt=0.0, lt=1.0)
    delta: float = Field(default=0.001, gt=0.0, lt=1.0)
    f: CoefficientSpec = Field(default_factory=CoefficientSpec)
    sigma: CoefficientSpec = Field(
        default_factory=lambda: CoefficientSpec(kind="constant", params={"value": 1.0})
    )
    F: CoefficientSpec = Field(
        default_factory=lambda: CoefficientSpec(kind="ou", params={"rate": 1.0})
    )
    G: CoefficientSpec = Field(
        default_factory=lambda: CoefficientSpec(kind="constant", params={"value": 1.0})
    )
    bar_f: Optional[CoefficientSpec] = None
    x0: list[float] = Field(default_factory=lambda: [0.0])
    y0: list[float] = Field(default_factory=lambda: [0.0])
    dim_bm: int = Field(default=1, ge=1)
    fast_dt_factor: float = Field(default=50.0, gt=0.0)
    macro_substeps: int = Field(default=20, ge=1)
    fast_scheme: FastScheme = FastScheme.ITO
    blowup_cap: float = Field(default=1e6, gt=0.0)
    # Assumption constants (Lipschitz, dissipativity)
    lipschitz: float = Field(default=1.0, gt=0.0)
    beta1: float = Field(default=1.0, gt=0.0)
    beta2: float = Field(default=1.0, gt=0.0)
    growth_c: float = Field(default=1.0, ge=0.0)
    dissipativity_points: int = Field(default=100, ge=1)
    dissipativity_radius: float = Field(default=5.0, gt=0.0)
    # Ergodic-average budget for bar_f
    ergodic_horizon: float = Field(default=200.0, gt=0.0)
    ergodic_burn_in: float = Field(default=10.0, ge=0.0)
    ergodic_dt: float = Field(default=0.01, gt=0.0)
    ergodic_batches: int = Field(default=20, ge=2)
    # Khasminskii decomposition
    Delta: Optional[float] = Field(default=None, gt=0.0)
    eta: float = Field(default=0.5, gt=0.0, lt=1.0)

    @model_validator(mode="after")
    def _check_scale_separation(self) -> "SlowFastConfig":
        if self.delta >= self.eps:
            raise ValueError(f"delta={self.delta} must be smaller than eps={self.eps}")
        return self


class DeviationConfig(_Section):
    """Which deviation regime, which event, which eps schedule."""

    problem: ProblemKind = ProblemKind.SINGLE_SCALE
    h_mode: HMode = HMode.LDP
    theta: float = Field(default=0.5, gt=0.0, lt=1.0)
    eps: float = Field(default=0.1, gt=0.0, lt=1.0)
    eps_schedule: list[float] = Field(default_factory=lambda: [0.5, 0.25, 0.125])
    event: EventSpec = Field(default_factory=EventSpec)
    # eps -> delta(eps) for slow-fast schedules: delta = delta_scale * eps ** delta_power
    delta_scale: float = Field(default=1.0, gt=0.0)
    delta_power: float = Field(default=2.0, gt=1.0)


class OptimizerConfig(_Section):
    """Rate-function minimisation over Cameron–Martin controls."""

    n_cells: int = Field(default=32, ge=1)
    cell_layout: CellLayout = CellLayout.GRADED
    kernel: KernelKind = KernelKind.VOLTERRA
    method: OptimizerMethod = OptimizerMethod.PROJECTED
    max_iter: int = Field(default=200, ge=1)
    tol: float = Field(default=1e-8, gt=0.0)
    fd_step: float = Field(default=1e-6, gt=0.0)
    feasibility_tol: float = Field(default=1e-8, gt=0.0)
    penalty0: float = Field(default=10.0, gt=0.0)
    penalty_growth: float = Field(default=10.0, gt=1.0)
    max_penalty_rounds: int = Field(default=8, ge=1)


class MonteCarloConfig(_Section):
    """Monte Carlo tail estimation."""

    n_runs: int = Field(default=10_000, ge=1000)
    chunk_size: int = Field(default=1024, ge=1)
    workers: int = Field(default=1, ge=1)
    confidence: float = Field(default=0.95, gt=0.0, lt=1.0)
    prefactor_exponent: float = 0.5


class DevlabConfig(_Section):
    """Main configuration for a devlab run."""

    seed: int = Field(default=0, ge=0)
    output_dir: str = str(ROUGHDEV_RUNS_DIR)
    gaussian: GaussianConfig = Field(default_factory=GaussianConfig)
    solver: SolverConfig = Field(default_factory=SolverConfig)
    young: YoungConfig = Field(default_factory=YoungConfig)
    single_scale: SingleScaleConfig = Field(default_factory=SingleScaleConfig)
    slow_fast: SlowFastConfig = Field(default_factory=SlowFastConfig)
    deviation: DeviationConfig = Field(default_factory=DeviationConfig)
    optimizer: OptimizerConfig = Field(default_factory=OptimizerConfig)
    monte_carlo: MonteCarloConfig = Field(default_factory=MonteCarloConfig)


# ---------------------------------------------------------------------------
# Config loading/saving
# ---------------------------------------------------------------------------


def load_config(path: str | Path | None = None) -> DevlabConfig:
    """
    Load a scenario from YAML.

    With no path, the user config file is used when present, else defaults.
    An explicit path that does not parse or validate raises InvalidInputError.
    """
    if path is None:
        if ROUGHDEV_CONFIG_FILE.exists():
            path = ROUGHDEV_CONFIG_FILE
        else:
            return DevlabConfig()
    try:
        data = yaml.safe_load(Path(path).read_text()) or {}
    except (OSError, yaml.YAMLError) as exc:
        raise InvalidInputError(f"Cannot read scenario {path}: {exc}") from exc
    if not isinstance(data, dict):
        raise InvalidInputError(f"Scenario {path} must be a YAML mapping")
    try:
        return DevlabConfig(**data)
    except ValidationError as exc:
        raise InvalidInputError(f"Invalid scenario {path}: {exc}") from exc


def save_config(config: DevlabConfig, path: str | Path | None = None) -> Path:
    """Save configuration to YAML."""
    target = Path(path) if path is not None else ROUGHDEV_CONFIG_FILE
    target.parent.mkdir(parents=True, exist_ok=True)
    target.write_text(yaml.dump(config.model_dump(mode="json"), default_flow_style=False))
    return target


def config_hash(config: BaseModel) -> str:
    """sha256 of the canonical JSON form, truncated to 16 hex characters."""
    canonical = json.dumps(config.model_dump(mode="json"), sort_keys=True)
    return hashlib.sha256(canonical.encode()).hexdigest()[:16]


def override(config: DevlabConfig, **changes: Any) -> DevlabConfig:
    """Return a copy with overrides applied; ``__`` separates sections, e.g. ``gaussian__n_steps=64``."""
    data = config.model_dump(mode="json")
    for dotted, value in changes.items():
        if value is None:
            continue
        node = data
        *parents, leaf = dotted.split("__")
        for key in parents:
            node = node[key]
        node[leaf] = value
    try:
        return DevlabConfig(**data)
    except ValidationError as exc:
        raise InvalidInputError(f"Invalid override: {exc}") from exc


__all__ = [
    "ROUGHDEV_HOME",
    "ROUGHDEV_RUNS_DIR",
    "ROUGHDEV_CONFIG_FILE",
    "GaussianConfig",
    "SolverConfig",
    "YoungConfig",
    "SingleScaleConfig",
    "SlowFastConfig",
    "DeviationConfig",
    "OptimizerConfig",
    "MonteCarloConfig",
    "DevlabConfig",
    "load_config",
    "save_config",
    "config_hash",
    "override",
]
