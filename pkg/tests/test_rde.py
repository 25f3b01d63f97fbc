"""Tests for roughdev.rough.rde."""

import math

import numpy as np
import pytest

from roughdev.core import SolverConfig, YoungConfig
from roughdev.core.budget import Budget
from roughdev.core.errors import BudgetExhaustedError, DriverRejectedError, InvalidInputError
from roughdev.rough.algebra import PiecewiseLinearPath
from roughdev.rough.controlled import constant, linear
from roughdev.rough.rde import (
    DriftDiffusionField,
    DriverBatch,
    Perturbation,
    RdeProblem,
    YoungProblem,
    check_driver_variation,
    linearized_problem,
    local_step_size,
    rk4_path,
    solve_rde,
    solve_rde_batch,
    solve_young,
    stability_probe,
)
from roughdev.rough.roughpath import HolderExponents, dilate, from_signature_path, window


EXPONENTS = HolderExponents(alpha=0.3, beta=0.28, gamma=0.49)


def scalar_driver(n=256, amp=0.5, freq=2 * np.pi):
    times = np.linspace(0.0, 1.0, n + 1)
    path = PiecewiseLinearPath(times, amp * np.sin(freq * times)[:, None])
    return path, from_signature_path(path, EXPONENTS)


def multiplicative():
    return linear(np.ones((1, 1, 1)))


class TestStepSize:
    """Tests for the local-existence step."""

    def test_formula(self):
        """λ = {C_β (K+1)^ν̂ (⫼X⫼+1)^ν̂}^{−1/(α−β)}."""
        lam, log10 = local_step_size(1.0, 2.0, EXPONENTS, c_beta=4.01, nu_hat=2.01)
        expected = (4.01 * 2.0**2.01 * 3.0**2.01) ** (-1.0 / 0.02)
        assert lam == pytest.approx(expected, rel=1e-10)
        assert log10 == pytest.approx(math.log10(expected), rel=1e-10)

    def test_shrinks_with_rough_norm(self):
        """Rougher drivers give shorter subintervals."""
        small, _ = local_step_size(1.0, 1.0, EXPONENTS)
        large, _ = local_step_size(1.0, 5.0, EXPONENTS)
        assert large < small


class TestRoughSolver:
    """Tests for solve_rde."""

    def test_linear_equation_against_exponential(self):
        """dY = Y dX on a geometric lift gives Y_T = exp(X_T − X_0)."""
        path, rp = scalar_driver()
        sol = solve_rde(RdeProblem(multiplicative(), rp, np.array([1.0])))
        exact = np.exp(path.values[:, 0] - path.values[0, 0])
        np.testing.assert_allclose(sol.values[:, 0], exact, rtol=1e-6)
        assert sol.complete
        assert sol.lambda_below_mesh

    def test_additive_noise_is_exact(self):
        """Constant σ gives Y = y0 + σ X."""
        path, rp = scalar_driver(n=64)
        sol = solve_rde(RdeProblem(constant(np.array([[0.5]]), 1), rp, np.array([2.0])))
        np.testing.assert_allclose(sol.values[:, 0], 2.0 + 0.5 * path.values[:, 0], atol=1e-13)

    def test_pure_drift_matches_ode(self):
        """σ = 0 reduces to the ODE y' = −y."""
        _, rp = scalar_driver(n=64)
        sol = solve_rde(
            RdeProblem(constant(np.zeros((1, 1)), 1), rp, np.array([1.0]), drift=linear([[-1.0]]))
        )
        reference = rk4_path(lambda y: -y, np.array([1.0]), rp.times, substeps=8)
        np.testing.assert_allclose(sol.values, reference, atol=1e-6)

    def test_solution_is_controlled(self):
        """Y† = σ(Y) along the solution."""
        _, rp = scalar_driver(n=32)
        sol = solve_rde(RdeProblem(multiplicative(), rp, np.array([1.0])))
        np.testing.assert_allclose(sol.path.y_dag[:, 0, 0], sol.values[:, 0])
        assert sol.growth is not None and sol.growth.ratio > 0.0

    def test_fixed_step_rule(self):
        """A fixed number of cells per subinterval gives the same fixed point."""
        _, rp = scalar_driver(n=32)
        problem = RdeProblem(multiplicative(), rp, np.array([1.0]))
        default = solve_rde(problem)
        fixed = solve_rde(problem, SolverConfig(step_rule="fixed", fixed_cells=4))
        assert len(fixed.steps) == 8
        np.testing.assert_allclose(fixed.values, default.values, atol=1e-9)

    def test_flow_property(self):
        """Solving on [0, T] equals solving on [0, T/2] and restarting from Y_{T/2}."""
        _, rp = scalar_driver(n=32)
        cfg = SolverConfig(step_rule="fixed", fixed_cells=4)
        drift = linear([[-0.5]])
        whole = solve_rde(RdeProblem(multiplicative(), rp, np.array([1.0]), drift=drift), cfg)
        first = solve_rde(
            RdeProblem(multiplicative(), window(rp, 0, 16), np.array([1.0]), drift=drift), cfg
        )
        second = solve_rde(
            RdeProblem(multiplicative(), window(rp, 16, 32), first.values[-1], drift=drift), cfg
        )
        joined = np.concatenate([first.values, second.values[1:]])
        np.testing.assert_allclose(joined, whole.values, atol=1e-12)

    def test_dilated_driver_equals_scaled_diffusion(self):
        """δ_{√ε} X driving σ gives the solution of X driving √ε σ."""
        _, rp = scalar_driver(n=32)
        cfg = SolverConfig(step_rule="fixed", fixed_cells=4)
        drift = linear([[-0.5]])
        eps = 0.25
        dilated = solve_rde(
            RdeProblem(multiplicative(), dilate(rp, eps**0.5), np.array([1.0]), drift=drift), cfg
        )
        scaled = solve_rde(
            RdeProblem(linear(eps**0.5 * np.ones((1, 1, 1))), rp, np.array([1.0]), drift=drift), cfg
        )
        np.testing.assert_allclose(dilated.values, scaled.values, atol=1e-9)

    def test_picard_sweeps_settle_within_block(self):
        """A subinterval of k cells settles after at most k + 1 sweeps."""
        _, rp = scalar_driver(n=32)
        sol = solve_rde(
            RdeProblem(multiplicative(), rp, np.array([1.0])),
            SolverConfig(step_rule="fixed", fixed_cells=4),
        )
        assert all(step.iterations <= 5 for step in sol.steps)
        assert all(np.isfinite(step.sweep_ratio) for step in sol.steps)


    def test_budget_returns_partial_solution(self):
        """A subinterval budget stops early with complete=False."""
        _, rp = scalar_driver(n=32)
        problem = RdeProblem(multiplicative(), rp, np.array([1.0]))
        sol = solve_rde(problem, SolverConfig(step_rule="fixed"), Budget(limit=2))
        assert not sol.complete
        assert sol.values.shape == (3, 1)
        assert sol.path.reference.n_steps == 2

    def test_empty_budget_raises(self):
        """No subinterval at all is a budget error."""
        _, rp = scalar_driver(n=8)
        with pytest.raises(BudgetExhaustedError):
            solve_rde(RdeProblem(multiplicative(), rp, np.array([1.0])), budget=Budget(limit=0))

    def test_shape_validation(self):
        """σ must be m × d for the driver dimension d."""
        _, rp = scalar_driver(n=8)
        with pytest.raises(InvalidInputError):
            RdeProblem(constant(np.ones((1, 2)), 1), rp, np.array([0.0]))
        with pytest.raises(InvalidInputError):
            DriftDiffusionField(linear(np.ones((2, 1))), constant(np.ones((1, 1)), 1))

    def test_step_frame(self):
        """The subinterval log has one row per step."""
        _, rp = scalar_driver(n=16)
        sol = solve_rde(RdeProblem(multiplicative(), rp, np.array([1.0])))
        frame = sol.step_frame()
        assert len(frame) == len(sol.steps)
        assert {"start", "stop", "tau", "iterations"} <= set(frame.columns)


class TestBatchSolver:
    """Tests for the batched rough solver."""

    def test_matches_single_solves(self):
        """Each row of a batch solve equals the individual solve."""
        drivers = [scalar_driver(n=32, amp=a)[1] for a in (0.2, 0.5, 0.8)]
        batch = solve_rde_batch(multiplicative(), DriverBatch.from_paths(drivers), [1.0])
        assert batch.shape == (3, 33, 1)
        for b, rp in enumerate(drivers):
            single = solve_rde(RdeProblem(multiplicative(), rp, np.array([1.0])))
            np.testing.assert_allclose(batch[b], single.values, atol=1e-9)

    def test_mismatched_grids_rejected(self):
        """Drivers in one batch share a grid."""
        with pytest.raises(InvalidInputError):
            DriverBatch.from_paths([scalar_driver(n=8)[1], scalar_driver(n=16)[1]])


class TestYoungSolver:
    """Tests for the skeleton solver and the linearized problem."""

    def test_rk4(self):
        """RK4 reproduces exp(−t)."""
        t = np.linspace(0.0, 1.0, 11)
        out = rk4_path(lambda x: -x, np.array([1.0]), t)
        np.testing.assert_allclose(out[:, 0], np.exp(-t), atol=1e-8)

    def test_linear_young_equation(self):
        """dY = Y du for a smooth piecewise-linear u gives exp(u_T − u_0)."""
        path, _ = scalar_driver(n=64)
        problem = YoungProblem(
            drift=lambda y: np.zeros_like(y),
            diffusion=lambda y: y[..., None],
            driver=path,
            initial=np.array([1.0]),
        )
        sol = solve_young(problem, YoungConfig(tol=1e-8, max_refinements=10))
        exact = np.exp(path.values[-1, 0] - path.values[0, 0])
        assert sol.values[-1, 0] == pytest.approx(exact, rel=1e-5)

    def test_linearized_problem(self):
        """dX = −X dt, dZ = −Z dt + du with u = t gives Z_T = 1 − e^{−T}."""
        times = np.linspace(0.0, 1.0, 33)
        driver = PiecewiseLinearPath(times, times[:, None])
        problem = linearized_problem(linear([[-1.0]]), constant(np.ones((1, 1)), 1), driver, [1.0])
        sol = solve_young(problem, YoungConfig(tol=1e-8, max_refinements=10))
        assert sol.values[-1, 0] == pytest.approx(math.exp(-1.0), rel=1e-6)
        assert sol.values[-1, 1] == pytest.approx(1.0 - math.exp(-1.0), rel=1e-6)

    def test_agrees_with_rough_solver_on_smooth_controls(self, rng):
        """On the lift of a smooth control solve_young and solve_rde agree to O(mesh)."""
        times = np.linspace(0.0, 1.0, 129)
        drift = linear([[-0.5]])
        sigma = multiplicative()
        for _ in range(5):
            coeffs = rng.normal(scale=0.5, size=3)
            u = sum(c * np.sin((k + 1) * np.pi * times) for k, c in enumerate(coeffs))
            control = PiecewiseLinearPath(times, u[:, None])
            lifted = from_signature_path(control, EXPONENTS)
            rough = solve_rde(RdeProblem(sigma, lifted, np.array([1.0]), drift=drift))
            young = solve_young(
                YoungProblem(drift.value, sigma.value, control, np.array([1.0])),
                YoungConfig(tol=1e-8, max_refinements=10),
            )
            assert np.max(np.abs(rough.values - young.values)) < 1.0 / 128

    def test_fixed_substeps_is_one_richardson_pair(self):
        """fixed_substeps skips refinement and reports a single pass."""
        path, _ = scalar_driver(n=64)
        problem = YoungProblem(
            drift=lambda y: np.zeros_like(y),
            diffusion=lambda y: y[..., None],
            driver=path,
            initial=np.array([1.0]),
        )
        sol = solve_young(problem, YoungConfig(fixed_substeps=4))
        assert sol.refinements == 1 and sol.converged
        exact = np.exp(path.values[-1, 0] - path.values[0, 0])
        assert sol.values[-1, 0] == pytest.approx(exact, rel=1e-3)


    def test_smooth_driver_passes_variation_check(self):
        """A straight line keeps its q-variation under refinement."""
        times = np.linspace(0.0, 1.0, 33)
        driver = PiecewiseLinearPath(times, times[:, None])
        fine, coarse = check_driver_variation(driver, 0.3, 0.01, 1.5)
        assert fine == pytest.approx(coarse)

    def test_zigzag_driver_rejected(self):
        """A zigzag whose q-variation lives on the finest scale is rejected."""
        k = np.arange(65)
        driver = PiecewiseLinearPath(k / 64.0, (k % 2 + 0.01 * k)[:, None])
        problem = YoungProblem(
            drift=lambda y: np.zeros_like(y),
            diffusion=lambda y: y[..., None],
            driver=driver,
            initial=np.array([1.0]),
            hurst=0.3,
        )
        with pytest.raises(DriverRejectedError):
            solve_young(problem)


class TestStabilityProbe:
    """Tests for the empirical Lipschitz constant of the solution map."""

    def test_ratios_are_finite(self):
        """Perturbing the initial value gives finite positive ratios."""
        _, rp = scalar_driver(n=32)
        problem = RdeProblem(multiplicative(), rp, np.array([1.0]))
        report = stability_probe(problem, [Perturbation(initial_delta=np.array([1.0]))])
        assert len(report.rows) == 3
        assert 0.0 < report.sup_ratio < np.inf

    def test_driver_perturbation(self):
        """Translating the driver by a smooth path is also measured."""
        _, rp = scalar_driver(n=32)
        shift = PiecewiseLinearPath(rp.times, rp.times[:, None])
        problem = RdeProblem(multiplicative(), rp, np.array([1.0]))
        report = stability_probe(
            problem, [Perturbation(driver_delta=shift, magnitudes=(0.1, 0.01))]
        )
        assert len(report.rows) == 2
        assert np.all(report.rows["denominator"] > 0.0)
