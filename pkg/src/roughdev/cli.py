"""
CLI — the devlab command line.

Commands:
    devlab lift               — Sample fBM (and BM) and write its level-3 lift
    devlab solve-rde          — Solve the single-scale RDE at scale eps
    devlab skeleton           — Skeleton path of a Cameron–Martin control
    devlab slow-fast          — Simulate the slow-fast system, averaging diagnostics
    devlab rate               — Minimise the rate function over controls
    devlab mc-tail            — Monte Carlo tail probabilities over the eps schedule
    devlab slope-check        — Compare the empirical deviation slope with the rate
    devlab check-invariants   — Run the structural invariant suite

Every command writes CSV files and a manifest.json into its run directory
and exits 0 on success, 2 on a failed invariant, 3 on an exhausted budget,
1 on any other error.
"""

from __future__ import annotations

import functools
import logging
import sys
from collections.abc import Callable
from pathlib import Path
from typing import Any, Optional

import click
import pandas as pd
from rich.console import Console
from rich.logging import RichHandler
from rich.table import Table

from roughdev import __version__
from roughdev.core import DevlabConfig, config_hash, load_config, override
from roughdev.core.errors import BudgetExhaustedError, RoughDevError, exit_code_for
from roughdev.core.output import write_output
from roughdev.core.provenance import RunManifest

console = Console(stderr=True)
logger = logging.getLogger("roughdev")


def _setup_logging(verbose: bool) -> None:
    logging.basicConfig(
        level=logging.DEBUG if verbose else logging.INFO,
        format="%(message)s",
        handlers=[RichHandler(console=console, show_time=False, show_path=verbose)],
        force=True,
    )


@click.group()
@click.version_option(version=__version__)
@click.option("--verbose", "-v", is_flag=True, help="Debug logging")
def main(verbose: bool) -> None:
    """devlab — large and moderate deviation experiments for rough differential equations."""
    _setup_logging(verbose)


# ---------------------------------------------------------------------------
# Shared plumbing
# ---------------------------------------------------------------------------


def scenario_options(fn: Callable[..., Any]) -> Callable[..., Any]:
    """--config, --seed and --out, shared by every command."""

    @click.option("--config", "-c", "config_path", type=click.Path(exists=True), default=None, help="Scenario YAML")
    @click.option("--seed", type=int, default=None, help="Override the scenario seed")
    @click.option("--out", "-o", "out_dir", type=click.Path(), default=None, help="Run directory")
    @functools.wraps(fn)
    def wrapper(config_path: Optional[str], seed: Optional[int], out_dir: Optional[str], **kwargs: Any) -> None:
        try:
            config = override(load_config(config_path), seed=seed)
        except RoughDevError as exc:
            console.print(f"[red]Error: {exc.message}[/red]")
            sys.exit(exit_code_for(exc))
        fn(config=config, out_dir=out_dir, **kwargs)

    return wrapper


def _run_dir(config: DevlabConfig, command: str, out_dir: Optional[str]) -> Path:
    if out_dir:
        return Path(out_dir)
    return Path(config.output_dir) / f"{command}-{config_hash(config)}"


def run_command(
    command: str,
    config: DevlabConfig,
    out_dir: Optional[str],
    body: Callable[[RunManifest], None],
) -> None:
    """Run ``body`` under a manifest; map library errors to exit codes."""
    manifest = RunManifest(_run_dir(config, command, out_dir), command, config)
    manifest.log_event("start", {"seed": config.seed})
    try:
        body(manifest)
    except RoughDevError as exc:
        if isinstance(exc, BudgetExhaustedError) and isinstance(exc.partial, pd.DataFrame):
            write_output(manifest, exc.partial, "partial.csv")
        manifest.fail(exc)
        manifest.save()
        console.print(f"[red]Error: {exc.message}[/red]")
        sys.exit(exit_code_for(exc))
    manifest.log_event("finish")
    manifest.finish()
    path = manifest.save()
    console.print(f"[green]>[/green] {command}: {len(manifest.outputs)} file(s), manifest {path}")


def _long_frame(times: Any, values: Any, prefix: str = "x") -> pd.DataFrame:
    """(B, N+1, m) trajectories as one row per (run, t)."""
    frames = []
    for run, path in enumerate(values):
        frame = pd.DataFrame({"run": run, "t": times})
        for i in range(path.shape[1]):
            frame[f"{prefix}_{i}"] = path[:, i]
        frames.append(frame)
    return pd.concat(frames, ignore_index=True)


def _print_table(title: str, frame: pd.DataFrame, columns: Optional[list[str]] = None) -> None:
    cols = columns or list(frame.columns)
    table = Table(title=title)
    for col in cols:
        table.add_column(col, justify="right")
    for _, row in frame[cols].iterrows():
        table.add_row(*(f"{v:.6g}" if isinstance(v, float) else str(v) for v in row))
    console.print(table)


# ---------------------------------------------------------------------------
# Paths and solvers
# ---------------------------------------------------------------------------


@main.command()
@scenario_options
@click.option("--index", type=int, default=0, help="Trajectory index")
def lift(config: DevlabConfig, out_dir: Optional[str], index: int) -> None:
    """Sample fBM (plus BM) and write the lifted rough path."""
    from roughdev.gaussian.lift import lift_mixed
    from roughdev.gaussian.sampling import sample_mixed_batch
    from roughdev.rough.algebra import PiecewiseLinearPath
    from roughdev.rough.roughpath import HolderExponents, max_shuffle_defect, to_frame

    def body(manifest: RunManifest) -> None:
        gauss = config.gaussian
        times, fbm, bm = sample_mixed_batch(gauss, config.seed, [index])
        exps = HolderExponents.for_hurst(gauss.hurst, gauss.kappa)
        mixed = lift_mixed(
            PiecewiseLinearPath(times, fbm[0]),
            PiecewiseLinearPath(times, bm[0]) if bm is not None else None,
            exps,
            gauss.lift_mode,
        )
        rp = mixed.rough_path
        manifest.log_event(
            "lift",
            {
                "index": index,
                "dim_fbm": mixed.dim_fbm,
                "dim_bm": mixed.dim_bm,
                "mode": mixed.mode.value,
                "shuffle_defect": max_shuffle_defect(rp),
            },
        )
        write_output(manifest, to_frame(rp), "lift.csv")

    run_command("lift", config, out_dir, body)


@main.command(name="solve-rde")
@scenario_options
@click.option("--eps", type=float, default=None, help="Noise scale (default: deviation.eps)")
@click.option("--runs", type=int, default=1, help="Number of trajectories")
@click.option("--max-subintervals", type=int, default=None, help="Subinterval budget (single run)")
def solve_rde_cmd(
    config: DevlabConfig, out_dir: Optional[str], eps: Optional[float], runs: int, max_subintervals: Optional[int]
) -> None:
    """Solve dX = f(X) dt + sqrt(eps) sigma(X) dB for one or many trajectories."""
    from roughdev.core.budget import Budget
    from roughdev.devlab.deviation import SingleScaleProblem, simulate_single_scale
    from roughdev.gaussian.lift import lift_mixed
    from roughdev.gaussian.sampling import sample_mixed_batch
    from roughdev.rough.algebra import PiecewiseLinearPath
    from roughdev.rough.rde import RdeProblem, solve_rde
    from roughdev.rough.roughpath import HolderExponents, dilate

    scale = config.deviation.eps if eps is None else eps

    def body(manifest: RunManifest) -> None:
        problem = SingleScaleProblem.from_config(config)
        if runs > 1:
            times, values = simulate_single_scale(problem, config, scale, config.seed, range(runs))
            write_output(manifest, _long_frame(times, values), "trajectories.csv")
            return
        gauss = config.gaussian
        times, fbm, bm = sample_mixed_batch(gauss, config.seed, [0])
        rp = lift_mixed(
            PiecewiseLinearPath(times, fbm[0]),
            PiecewiseLinearPath(times, bm[0]) if bm is not None else None,
            HolderExponents.for_hurst(gauss.hurst, gauss.kappa),
            gauss.lift_mode,
        ).rough_path
        driver = dilate(rp, scale**0.5)
        budget = Budget(name="subintervals", limit=max_subintervals) if max_subintervals else None
        sol = solve_rde(RdeProblem(problem.sigma, driver, problem.x0, problem.drift), config.solver, budget)
        manifest.log_event(
            "solve",
            {"lambda": sol.lam, "rough_norm": sol.rough_norm, "constant_k": sol.constant_k, "complete": sol.complete},
        )
        frame = _long_frame(sol.times, sol.values[None])
        write_output(manifest, sol.step_frame(), "steps.csv")
        if not sol.complete:
            raise BudgetExhaustedError(
                f"subinterval budget stopped the solve at t={sol.times[-1]:.4g}", partial=frame
            )
        write_output(manifest, frame, "trajectories.csv")

    run_command("solve-rde", config, out_dir, body)


@main.command()
@scenario_options
@click.option("--control", "control_path", type=click.Path(exists=True), default=None, help="Control CSV from `rate`")
def skeleton(config: DevlabConfig, out_dir: Optional[str], control_path: Optional[str]) -> None:
    """Skeleton path of a control (the zero control gives the noiseless limit)."""
    from roughdev.devlab.deviation import DeviationSpec
    from roughdev.devlab.rate import SkeletonMap, control_from_frame, rate_value, skeleton_frame
    from roughdev.gaussian.cameron_martin import CameronMartinControl

    def body(manifest: RunManifest) -> None:
        dspec = DeviationSpec.from_config(config)
        smap = SkeletonMap.from_spec(dspec, config)
        if control_path:
            ctrl = control_from_frame(pd.read_csv(control_path), smap.basis)
        else:
            ctrl = CameronMartinControl.zeros(smap.basis)
        value, path = rate_value(ctrl, smap)
        manifest.log_event("skeleton", {"rate_value": value})
        write_output(manifest, skeleton_frame(smap.times, path), "skeleton.csv")
        console.print(f"[green]>[/green] control cost {value:.6g}")

    run_command("skeleton", config, out_dir, body)


@main.command(name="slow-fast")
@scenario_options
@click.option("--runs", type=int, default=16, help="Number of trajectories")
@click.option("--khasminskii", is_flag=True, help="Also write the Khasminskii decomposition report")
@click.option("--khasminskii-runs", type=int, default=200, help="Runs per eps for the report")
def slow_fast_cmd(
    config: DevlabConfig, out_dir: Optional[str], runs: int, khasminskii: bool, khasminskii_runs: int
) -> None:
    """Simulate the slow-fast system and compare with the averaged equation."""
    from roughdev.gaussian.sampling import FbmSpec, sample_fbm_batch
    from roughdev.slowfast.averaging import AveragedModel, averaged_path
    from roughdev.slowfast.khasminskii import khasminskii_report
    from roughdev.slowfast.simulate import fast_grid, simulate_slow_fast
    from roughdev.slowfast.system import SlowFastSpec, check_dissipativity

    def body(manifest: RunManifest) -> None:
        sf = config.slow_fast
        spec = SlowFastSpec.from_config(config)
        report = check_dissipativity(spec, sf.dissipativity_points, sf.dissipativity_radius, config.seed)
        manifest.log_event(
            "dissipativity",
            {"contraction_margin": report.contraction_margin, "growth_margin": report.growth_margin},
        )
        fspec = FbmSpec.from_config(config.gaussian).model_copy(update={"dim": spec.d})
        indices = list(range(runs))
        fbm = sample_fbm_batch(fspec, config.seed, indices)
        grid = fast_grid(fspec.times, spec.delta, sf)
        paths = simulate_slow_fast(spec, grid, fbm, config.seed, indices)
        write_output(manifest, _long_frame(paths.times, paths.slow), "slow.csv")
        write_output(manifest, _long_frame(paths.times, paths.fast, prefix="y"), "fast.csv")

        model = AveragedModel(spec, sf, config.seed)
        bar = averaged_path(model.function(), spec.x0, paths.times)
        write_output(manifest, _long_frame(paths.times, bar[None]), "averaged.csv")
        if model.table is not None:
            write_output(manifest, model.table, "bar_f.csv")
        if khasminskii:
            frame = khasminskii_report(spec, config, n_runs=khasminskii_runs)
            write_output(manifest, frame, "khasminskii.csv")
            _print_table("Khasminskii decomposition", frame, ["eps", "delta", "Delta", "averaging_error"])

    run_command("slow-fast", config, out_dir, body)


# ---------------------------------------------------------------------------
# Deviation experiments
# ---------------------------------------------------------------------------


@main.command()
@scenario_options
@click.option("--refine", is_flag=True, help="Also run the cell-refinement study")
@click.option("--method", type=click.Choice(["projected", "penalty"]), default=None)
def rate(config: DevlabConfig, out_dir: Optional[str], refine: bool, method: Optional[str]) -> None:
    """Minimise 1/2 ||(h, v')||^2 over controls whose skeleton reaches the event."""
    from roughdev.devlab.deviation import DeviationSpec
    from roughdev.devlab.rate import SkeletonMap, optimize_rate, refinement_study

    def body(manifest: RunManifest) -> None:
        dspec = DeviationSpec.from_config(config)
        result = optimize_rate(SkeletonMap.from_spec(dspec, config), config.optimizer, method)
        manifest.log_event(
            "rate",
            {
                "value": result.value,
                "feasible": result.feasible,
                "violation": result.violation,
                "method": result.method.value,
                "n_cells": result.n_cells,
            },
        )
        write_output(manifest, result.control_frame(), "control.csv")
        write_output(manifest, result.skeleton_frame(), "skeleton.csv")
        write_output(manifest, result.trace, "trace.csv")
        if refine:
            write_output(manifest, refinement_study(dspec, config), "refinement.csv")
        status = "[green]feasible[/green]" if result.feasible else "[yellow]infeasible[/yellow]"
        console.print(f"[green]>[/green] rate {result.value:.6g} ({status})")

    run_command("rate", config, out_dir, body)


@main.command(name="mc-tail")
@scenario_options
@click.option("--eps", "eps_values", type=float, multiple=True, help="Scales (default: eps_schedule)")
@click.option("--runs", type=int, default=None, help="Runs per eps (default: monte_carlo.n_runs)")
@click.option("--budget", "max_runs", type=int, default=None, help="Total run budget")
def mc_tail(
    config: DevlabConfig,
    out_dir: Optional[str],
    eps_values: tuple[float, ...],
    runs: Optional[int],
    max_runs: Optional[int],
) -> None:
    """Crude Monte Carlo estimates of P(event) with Wilson intervals."""
    from roughdev.core.budget import Budget
    from roughdev.devlab.deviation import DeviationSpec
    from roughdev.devlab.montecarlo import tail_sweep

    def body(manifest: RunManifest) -> None:
        dspec = DeviationSpec.from_config(config)
        budget = Budget(name="runs", limit=max_runs) if max_runs else None
        frame = tail_sweep(dspec, config, list(eps_values) or None, runs, budget)
        write_output(manifest, frame, "tail.csv")
        _print_table("Tail estimates", frame, ["eps", "runs", "hits", "probability", "ci_low", "ci_high"])

    run_command("mc-tail", config, out_dir, body)


@main.command(name="slope-check")
@scenario_options
@click.option("--tail", "tail_path", type=click.Path(exists=True), default=None, help="tail.csv from `mc-tail`")
@click.option("--rate", "rate_value", type=float, default=None, help="Rate (default: optimise it)")
@click.option("--tolerance", type=float, default=0.15, help="Allowed relative gap")
def slope_check(
    config: DevlabConfig,
    out_dir: Optional[str],
    tail_path: Optional[str],
    rate_value: Optional[float],
    tolerance: float,
) -> None:
    """Regress -log P against 1/a(eps) and compare the slope with the rate."""
    from roughdev.devlab.deviation import DeviationSpec
    from roughdev.devlab.montecarlo import tail_sweep
    from roughdev.devlab.rate import SkeletonMap, optimize_rate
    from roughdev.devlab.slope import ldp_slope_check

    def body(manifest: RunManifest) -> None:
        dspec = DeviationSpec.from_config(config)
        tail = pd.read_csv(tail_path) if tail_path else tail_sweep(dspec, config)
        if not tail_path:
            write_output(manifest, tail, "tail.csv")
        target = rate_value
        if target is None:
            target = optimize_rate(SkeletonMap.from_spec(dspec, config), config.optimizer).value
        check = ldp_slope_check(
            tail,
            target,
            dspec.h_mode,
            dspec.theta,
            tolerance,
            config.monte_carlo.prefactor_exponent,
        )
        manifest.log_event("slope", check.summary())
        write_output(manifest, check.frame, "slope.csv")
        write_output(manifest, pd.DataFrame([check.summary()]), "summary.csv")
        colour = "green" if check.passed else "yellow"
        console.print(
            f"[{colour}]>[/{colour}] slope {check.slope:.4g} vs rate {check.rate:.4g} "
            f"(gap {100 * check.gap:.1f}%, tolerance {100 * tolerance:.0f}%)"
        )

    run_command("slope-check", config, out_dir, body)


@main.command(name="check-invariants")
@scenario_options
@click.option("--only", multiple=True, help="Run only the named checks")
def check_invariants(config: DevlabConfig, out_dir: Optional[str], only: tuple[str, ...]) -> None:
    """Run the invariant suite; exits 2 when any check fails."""
    from roughdev.core.errors import InvariantError
    from roughdev.devlab.invariants import run_invariant_checks

    def body(manifest: RunManifest) -> None:
        frame = run_invariant_checks(config, list(only) or None)
        write_output(manifest, frame, "invariants.csv")
        _print_table("Invariants", frame, ["name", "value", "tolerance", "passed"])
        failed = frame.loc[~frame["passed"], "name"].tolist()
        if failed:
            raise InvariantError(f"invariant checks failed: {', '.join(failed)}", failed=failed)

    run_command("check-invariants", config, out_dir, body)


if __name__ == "__main__":
    main()
