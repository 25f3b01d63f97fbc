"""
Structural invariants — algebraic identities of signatures, the sewing
bound, a closed-form RDE and the zero-cost control — evaluated on seeded
random inputs.
"""

from __future__ import annotations

import logging
from dataclasses import asdict, dataclass
from typing import Callable, Optional

import numpy as np
import pandas as pd

from roughdev.core import DevlabConfig
from roughdev.core.errors import InvalidInputError, InvariantError
from roughdev.core.scenario import HMode, LiftMode, ProblemKind
from roughdev.devlab.deviation import DeviationSpec, limit_path
from roughdev.devlab.rate import SkeletonMap, build_basis, rate_value
from roughdev.gaussian.cameron_martin import CameronMartinControl
from roughdev.gaussian.lift import lift_fbm, lift_mixed
from roughdev.gaussian.sampling import FbmSpec, sample_fbm
from roughdev.rough.algebra import PiecewiseLinearPath, dilate, inverse, shuffle_defect, signature
from roughdev.rough.controlled import ControlledPath, linear, rough_integral
from roughdev.rough.rde import RdeProblem, solve_rde
from roughdev.rough.roughpath import (
    HolderExponents,
    RoughPath,
    from_signature_path,
    max_shuffle_defect,
    translate_path,
)
from roughdev.slowfast.system import SlowFastSpec, check_dissipativity

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class InvariantResult:
    name: str
    value: float
    tolerance: float
    detail: str = ""

    @property
    def passed(self) -> bool:
        return bool(np.isfinite(self.value)) and self.value <= self.tolerance


def _random_path(seed: int, n: int = 24, dim: int = 3) -> PiecewiseLinearPath:
    rng = np.random.default_rng([seed, n, dim])
    times = np.sort(np.concatenate([[0.0, 1.0], rng.uniform(0.0, 1.0, n - 1)]))
    values = np.cumsum(rng.standard_normal((n + 1, dim)) * 0.3, axis=0)
    return PiecewiseLinearPath(times, values)


def _scale(x: float) -> float:
    return max(1.0, abs(x))


# ---------------------------------------------------------------------------
# Checks
# ---------------------------------------------------------------------------


def check_chen(config: DevlabConfig) -> InvariantResult:
    path = _random_path(config.seed)
    rng = np.random.default_rng([config.seed, 1])
    s, u, t = np.sort(rng.uniform(0.0, 1.0, 3))
    whole = signature(path, s, t)
    split = signature(path, s, u) * signature(path, u, t)
    err = (whole - split).max_abs() / _scale(whole.max_abs())
    return InvariantResult("chen", err, 1e-12, f"s={s:.3f} u={u:.3f} t={t:.3f}")


def check_shuffle(config: DevlabConfig) -> InvariantResult:
    sig = signature(_random_path(config.seed))
    return InvariantResult("shuffle", shuffle_defect(sig) / _scale(sig.max_abs()), 1e-10)


def check_reversal(config: DevlabConfig) -> InvariantResult:
    """S(x) ⊗ S(reversed x) = 1, and S(reversed x) = S(x)⁻¹."""
    path = _random_path(config.seed)
    back = PiecewiseLinearPath(path.times, path.values[::-1])
    sig, rev = signature(path), signature(back)
    err = max(
        (sig * rev - sig.identity(path.dim)).max_abs(),
        (rev - inverse(sig)).max_abs(),
    )
    return InvariantResult("reversal", err / _scale(sig.max_abs()), 1e-12)


def check_dilation(config: DevlabConfig) -> InvariantResult:
    path = _random_path(config.seed)
    lam = 1.7
    scaled = PiecewiseLinearPath(path.times, lam * path.values)
    target = dilate(signature(path), lam)
    err = (signature(scaled) - target).max_abs() / _scale(target.max_abs())
    return InvariantResult("dilation", err, 1e-12, f"lambda={lam}")


def check_translation(config: DevlabConfig) -> InvariantResult:
    """T^h of the lift of x is the lift of x + h for piecewise-linear paths."""
    path = _random_path(config.seed, dim=2)
    shift = _random_path(config.seed + 1, dim=2)
    shift = PiecewiseLinearPath(path.times, shift.values)
    exps = HolderExponents.for_hurst(config.gaussian.hurst, config.gaussian.kappa)
    moved = translate_path(from_signature_path(path, exps), shift)
    direct = from_signature_path(PiecewiseLinearPath(path.times, path.values + shift.values), exps)
    err = max(
        float(np.max(np.abs(moved.block2 - direct.block2))),
        float(np.max(np.abs(moved.block3 - direct.block3))),
        float(np.max(np.abs((moved.path - moved.path[0]) - (direct.path - direct.path[0])))),
    )
    return InvariantResult("translation", err, 1e-9)


def check_translation_group(config: DevlabConfig) -> InvariantResult:
    """T^{h2} T^{h1} = T^{h1+h2}, T^{-h} T^h = id and geometricity on an Itô-cross lift."""
    base = _random_path(config.seed, dim=2)
    exps = HolderExponents.for_hurst(config.gaussian.hurst, config.gaussian.kappa)
    fbm = PiecewiseLinearPath(base.times, base.values[:, :1])
    bm = PiecewiseLinearPath(base.times, base.values[:, 1:])
    rp = lift_mixed(fbm, bm, exps, LiftMode.ITO_CROSS).rough_path
    h1 = PiecewiseLinearPath(base.times, _random_path(config.seed + 1, dim=2).values)
    h2 = PiecewiseLinearPath(base.times, _random_path(config.seed + 2, dim=2).values)
    twice = translate_path(translate_path(rp, h1), h2)
    once = translate_path(rp, PiecewiseLinearPath(base.times, h1.values + h2.values))
    back = translate_path(translate_path(rp, h1), PiecewiseLinearPath(base.times, -h1.values))

    def gap(a: RoughPath, b: RoughPath) -> float:
        return max(
            float(np.max(np.abs(a.block2 - b.block2))),
            float(np.max(np.abs(a.block3 - b.block3))),
        )

    err = max(gap(twice, once), gap(back, rp), max_shuffle_defect(once))
    return InvariantResult("translation-group", err, 1e-8, f"{rp.n_steps} cells")


def _fbm_lift(config: DevlabConfig, n_steps: int) -> tuple[PiecewiseLinearPath, HolderExponents]:
    g = config.gaussian
    spec = FbmSpec(hurst=g.hurst, dim=1, n_steps=n_steps, horizon=g.horizon, test_mode=g.test_mode)
    return sample_fbm(spec, config.seed), HolderExponents.for_hurst(g.hurst, g.kappa)


def check_sewing(config: DevlabConfig) -> InvariantResult:
    """∫ X dX over every grid pair stays within the sewing bound."""
    path, exps = _fbm_lift(config, 64)
    rp = lift_fbm(path, exps)
    n1 = rp.n_steps + 1
    cp = ControlledPath(
        rp,
        rp.path,
        np.broadcast_to(np.eye(rp.dim), (n1, rp.dim, rp.dim)),
        np.zeros((n1, rp.dim, rp.dim, rp.dim)),
    )
    _, diag = rough_integral(cp, diagnostics=True)
    assert diag is not None
    return InvariantResult(
        "sewing", 1.0 - diag.fraction_within, 0.0, f"{diag.n_pairs} pairs, ratio {diag.max_ratio:.3g}"
    )


def _linear_rde_error(config: DevlabConfig, n_steps: int) -> float:
    """sup_t |Y_t − exp(x_t − x_0)| for dY = Y dX over the lift of a smooth seeded x."""
    g = config.gaussian
    rng = np.random.default_rng([config.seed, 7])
    amp, freq, phase = rng.uniform(0.3, 0.8), rng.uniform(2.0, 6.0), rng.uniform(0.0, np.pi)
    times = np.linspace(0.0, g.horizon, n_steps + 1)
    path = PiecewiseLinearPath(times, (amp * np.sin(freq * times + phase))[:, None])
    rp = from_signature_path(path, HolderExponents.for_hurst(g.hurst, g.kappa))
    sol = solve_rde(RdeProblem(linear(np.ones((1, 1, 1))), rp, np.array([1.0])), config.solver)
    exact = np.exp(path.values[:, 0] - path.values[0, 0])
    return float(np.max(np.abs(sol.values[:, 0] - exact)))


def check_linear_rde(config: DevlabConfig) -> InvariantResult:
    """dY = Y dX driven by a geometric lift has Y_t = Y_0 exp(x_t − x_0)."""
    return InvariantResult("linear-rde", _linear_rde_error(config, 2048), 5e-3, "N=2048")


def check_rde_order(config: DevlabConfig) -> InvariantResult:
    """The linear-RDE error at least halves (within 30%) under one dyadic refinement."""
    coarse, fine = _linear_rde_error(config, 64), _linear_rde_error(config, 128)
    ratio = fine / coarse if coarse > 0.0 else 0.0
    return InvariantResult("rde-order", ratio, 0.65, f"errors {coarse:.3g} -> {fine:.3g}")


def check_zero_rate(config: DevlabConfig) -> InvariantResult:
    """The zero control costs nothing, and its LDP skeleton is the noiseless limit."""
    dspec = DeviationSpec.from_config(config)
    basis = build_basis(dspec, config)
    zero = CameronMartinControl.zeros(basis)
    err = zero.half_norm_sq
    detail = ""
    if dspec.h_mode is HMode.LDP:
        skeleton = SkeletonMap.from_spec(dspec, config, basis)
        cost, path = rate_value(zero, skeleton)
        err = max(err, cost, float(np.max(np.abs(path - skeleton.reference))))
        rk4 = float(np.max(np.abs(path - limit_path(dspec, config, basis.times))))
        detail = f"{rk4:.2e} from the RK4 limit"
    return InvariantResult("zero-rate", err, 1e-8, detail)


def check_dissipativity_spot(config: DevlabConfig) -> Optional[InvariantResult]:
    if config.deviation.problem is not ProblemKind.SLOW_FAST:
        return None
    sf = config.slow_fast
    report = check_dissipativity(
        SlowFastSpec.from_config(config), sf.dissipativity_points, sf.dissipativity_radius, config.seed
    )
    worst = max(report.contraction_margin, report.growth_margin)
    return InvariantResult("dissipativity", max(worst, 0.0), 1e-10, f"{report.n_points} points")


CHECKS: dict[str, Callable[[DevlabConfig], Optional[InvariantResult]]] = {
    "chen": check_chen,
    "shuffle": check_shuffle,
    "reversal": check_reversal,
    "dilation": check_dilation,
    "translation": check_translation,
    "translation-group": check_translation_group,
    "sewing": check_sewing,
    "linear-rde": check_linear_rde,
    "rde-order": check_rde_order,
    "zero-rate": check_zero_rate,
    "dissipativity": check_dissipativity_spot,
}


def run_invariant_checks(
    config: DevlabConfig, names: Optional[list[str]] = None, strict: bool = False
) -> pd.DataFrame:
    """Run the named checks (all by default); ``strict`` raises InvariantError on any failure."""
    selected = names or list(CHECKS)
    unknown = [n for n in selected if n not in CHECKS]
    if unknown:
        raise InvalidInputError(f"unknown invariant checks: {', '.join(unknown)}")
    rows = []
    for name in selected:
        result = CHECKS[name](config)
        if result is None:
            logger.debug("check %s does not apply to this scenario", name)
            continue
        row = asdict(result)
        row["passed"] = result.passed
        rows.append(row)
        log = logger.info if result.passed else logger.error
        log("%-13s %.3e (tol %.1e)", name, result.value, result.tolerance)
    frame = pd.DataFrame(rows)
    if strict and not frame["passed"].all():
        failed = frame.loc[~frame["passed"], "name"].tolist()
        raise InvariantError(f"invariant checks failed: {', '.join(failed)}", failed=failed)
    return frame


__all__ = [
    "InvariantResult",
    "check_chen",
    "check_shuffle",
    "check_reversal",
    "check_dilation",
    "check_translation",
    "check_translation_group",
    "check_sewing",
    "check_linear_rde",
    "check_rde_order",
    "check_zero_rate",
    "check_dissipativity_spot",
    "CHECKS",
    "run_invariant_checks",
]
