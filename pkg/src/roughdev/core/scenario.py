"""
Scenario vocabulary — the enums and small sub-models shared by the
configuration layer and the numerical packages.
"""

from __future__ import annotations

from enum import Enum
from typing import Any

from pydantic import BaseModel, ConfigDict, Field


# ---------------------------------------------------------------------------
# Enums
# ---------------------------------------------------------------------------


class HMode(str, Enum):
    CLT = "clt"  # h = 1
    LDP = "ldp"  # h = 1/sqrt(eps)
    MDP = "mdp"  # h = eps^(-theta/2)


class LiftMode(str, Enum):
    GEOMETRIC = "geometric"  # Stratonovich-type cross integrals
    ITO_CROSS = "ito-cross"  # forward Itô cross integrals


class ProblemKind(str, Enum):
    SINGLE_SCALE = "single-scale"
    SLOW_FAST = "slow-fast"


class SimulationMode(str, Enum):
    PLAIN = "plain"
    CONTROLLED_LDP = "controlled-ldp"
    CONTROLLED_MDP = "controlled-mdp"


class EventKind(str, Enum):
    TERMINAL = "terminal"  # obs_T[k] >= a
    SUP = "sup"  # max_t |obs_t[k] - ref_t[k]| >= a


class StepRule(str, Enum):
    LAMBDA = "lambda"  # subinterval length from the local-existence formula
    FIXED = "fixed"  # fixed number of grid cells per subinterval


class RemainderVariant(str, Enum):
    LEFT = "left"
    RIGHT = "right"


class PairMode(str, Enum):
    ALL = "all"
    DYADIC = "dyadic"
    AUTO = "auto"


class KernelKind(str, Enum):
    VOLTERRA = "volterra"  # u = K_H h
    DISCRETE = "discrete"  # Cholesky factor of R on the control breakpoints


class CellLayout(str, Enum):
    UNIFORM = "uniform"
    GRADED = "graded"  # cells refined towards both endpoints


class OptimizerMethod(str, Enum):
    PROJECTED = "projected"
    PENALTY = "penalty"


class FastScheme(str, Enum):
    ITO = "ito"  # Euler–Maruyama with the Itô-corrected drift
    STRATONOVICH = "stratonovich"  # Heun on the uncorrected drift


def h_value(eps: float, mode: HMode | str, theta: float = 0.5) -> float:
    """Deviation scale h(ε): 1 (CLT), ε^{-1/2} (LDP) or ε^{-θ/2} (MDP)."""
    mode = HMode(mode)
    if mode is HMode.CLT:
        return 1.0
    if mode is HMode.LDP:
        return float(eps**-0.5)
    return float(eps ** (-theta / 2.0))


def speed(eps: float, mode: HMode | str, theta: float = 0.5) -> float:
    """a(ε) in P ≈ exp(−I / a(ε)): ε for LDP, 1/h²(ε) otherwise."""
    mode = HMode(mode)
    if mode is HMode.LDP:
        return eps
    return 1.0 / h_value(eps, mode, theta) ** 2


# ---------------------------------------------------------------------------
# Sub-models
# ---------------------------------------------------------------------------


class CoefficientSpec(BaseModel):
    """A coefficient picked from the palette: ``kind`` plus its parameters."""

    model_config = ConfigDict(extra="forbid")

    kind: str = "constant"
    params: dict[str, Any] = Field(default_factory=dict)


class EventSpec(BaseModel):
    """Rare event on the observable path: ``phi(path) >= threshold``."""

    model_config = ConfigDict(extra="forbid")

    kind: EventKind = EventKind.TERMINAL
    component: int = Field(default=0, ge=0)
    threshold: float = Field(default=1.0, gt=0.0)


__all__ = [
    "HMode",
    "LiftMode",
    "ProblemKind",
    "SimulationMode",
    "EventKind",
    "StepRule",
    "RemainderVariant",
    "PairMode",
    "KernelKind",
    "CellLayout",
    "OptimizerMethod",
    "FastScheme",
    "h_value",
    "speed",
    "CoefficientSpec",
    "EventSpec",
]
