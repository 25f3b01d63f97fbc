"""Tests for roughdev.devlab.rate."""

import numpy as np
import pytest

from roughdev.core import override
from roughdev.core.errors import InvalidInputError
from roughdev.core.scenario import OptimizerMethod
from roughdev.devlab.deviation import DeviationSpec, clt_variance_oracle
from roughdev.devlab.rate import (
    SkeletonMap,
    additive_rate_oracle,
    build_basis,
    control_from_frame,
    control_to_frame,
    optimize_rate,
    rate_function,
    rate_value,
    refinement_study,
    scalar_rate_curve,
)
from roughdev.gaussian.cameron_martin import CameronMartinControl


def discrete(config, **changes):
    """Same scenario with the exact discrete Cameron–Martin kernel."""
    return override(config, optimizer__kernel="discrete", **changes)


class TestSkeletonMap:
    """Tests for the control-to-skeleton map."""

    def test_clt_has_no_rate(self, small_config):
        """The central limit regime is rejected."""
        config = override(small_config, deviation__h_mode="clt")
        dspec = DeviationSpec.from_config(config)
        with pytest.raises(InvalidInputError):
            SkeletonMap.from_spec(dspec, config)

    def test_additive_skeleton_is_the_control(self, small_config):
        """With f = 0 and σ = 1 the skeleton is u itself."""
        config = discrete(small_config)
        dspec = DeviationSpec.from_config(config)
        skeleton = SkeletonMap.from_spec(dspec, config)
        ctrl = CameronMartinControl.zeros(skeleton.basis)
        np.testing.assert_allclose(skeleton.path(ctrl), 0.0, atol=1e-14)
        np.testing.assert_allclose(skeleton.reference, 0.0, atol=1e-14)

    def test_rate_value_checks_basis(self, small_config):
        """A control on other breakpoints cannot be evaluated."""
        dspec = DeviationSpec.from_config(small_config)
        skeleton = SkeletonMap.from_spec(dspec, small_config)
        other = CameronMartinControl.zeros(build_basis(dspec, small_config, n_cells=4))
        with pytest.raises(InvalidInputError):
            rate_value(other, skeleton)

    def test_rate_value_of_zero_control(self, small_config):
        """The zero control costs nothing and its skeleton is the noiseless limit."""
        config = override(
            discrete(small_config),
            single_scale__drift={"kind": "linear", "params": {"matrix": [[-1.0]]}},
            single_scale__x0=[1.0],
        )
        skeleton = SkeletonMap.from_spec(DeviationSpec.from_config(config), config)
        value, path = rate_value(CameronMartinControl.zeros(skeleton.basis), skeleton)
        assert value == 0.0
        np.testing.assert_allclose(path[:, 0], np.exp(-skeleton.times), rtol=1e-4)

    def test_rate_value_of_constant_control(self, small_config):
        """With f = 0 and σ = 1 a control ĥ has cost ½ Σ ĥ_k² |cell k| and skeleton u."""
        config = discrete(small_config)
        skeleton = SkeletonMap.from_spec(DeviationSpec.from_config(config), config)
        basis = skeleton.basis
        ctrl = CameronMartinControl(
            basis, np.ones((basis.n_cells, 1)), np.zeros((basis.n_cells, basis.dim_bm))
        )
        value, path = rate_value(ctrl, skeleton)
        assert value == pytest.approx(ctrl.half_norm_sq)
        assert value > 0.0
        np.testing.assert_allclose(path, ctrl.u_values(), atol=1e-10)


class TestOptimizeRate:
    """Tests for the rate optimiser."""

    def test_additive_rate(self, small_config):
        """I(a) = a² / (2 T^{2H}) for the terminal event of √ε b^H."""
        config = discrete(small_config)
        result = rate_function(DeviationSpec.from_config(config), config)
        assert result.feasible
        assert result.value == pytest.approx(additive_rate_oracle(1.0, 0.3), rel=0.01)
        assert result.skeleton[-1, 0] >= 1.0 - 1e-6
        assert result.method is OptimizerMethod.PROJECTED

    def test_penalty_method(self, small_config):
        """The penalty method reaches the same rate."""
        config = discrete(small_config, optimizer__method="penalty")
        result = rate_function(DeviationSpec.from_config(config), config)
        assert result.value == pytest.approx(0.5, rel=0.01)
        assert result.violation < 1e-4

    def test_reached_event_costs_nothing(self, small_config):
        """X̄_T = 2 already exceeds a = 1."""
        config = override(
            small_config, single_scale__drift={"kind": "constant", "params": {"value": 2.0}}
        )
        result = rate_function(DeviationSpec.from_config(config), config)
        assert result.value == 0.0
        assert result.feasible
        assert np.all(result.control.hhat == 0.0)

    def test_feasible_init_bounds_result(self, small_config):
        """The optimiser never returns a dearer control than a feasible start."""
        config = discrete(small_config)
        dspec = DeviationSpec.from_config(config)
        skeleton = SkeletonMap.from_spec(dspec, config)
        best = optimize_rate(skeleton, config.optimizer)
        start = CameronMartinControl(skeleton.basis, 1.5 * best.control.hhat, best.control.vprime)
        again = optimize_rate(skeleton, config.optimizer, init=start)
        assert again.value <= 2.25 * best.value + 1e-12

    def test_rate_is_quadratic_in_threshold(self, small_config):
        """Linear skeleton, terminal event: I(2a) = 4 I(a)."""
        config = discrete(small_config)
        skeleton = SkeletonMap.from_spec(DeviationSpec.from_config(config), config)
        curve = scalar_rate_curve(skeleton, [0.5, 1.0], config.optimizer)
        assert curve["feasible"].all()
        assert curve["rate"].iloc[1] == pytest.approx(4.0 * curve["rate"].iloc[0], rel=1e-3)

    def test_linearized_mdp_rate(self, small_config):
        """For dX = −X dt the moderate rate is a² / (2 Var Z_T)."""
        config = discrete(
            small_config,
            single_scale__drift={"kind": "linear", "params": {"matrix": [[-1.0]]}},
            deviation__h_mode="mdp",
            optimizer__n_cells=16,
        )
        result = rate_function(DeviationSpec.from_config(config), config)
        expected = 1.0 / (2.0 * clt_variance_oracle(1.0, 0.3))
        assert result.value == pytest.approx(expected, rel=0.05)


class TestRateOutputs:
    """Tests for control files and refinement."""

    def test_control_frame_round_trip(self, small_config):
        """A written control reads back onto the same basis."""
        config = discrete(small_config)
        result = rate_function(DeviationSpec.from_config(config), config)
        frame = result.control_frame()
        assert list(frame.columns[:3]) == ["cell", "t_start", "t_end"]
        back = control_from_frame(frame, result.control.basis)
        np.testing.assert_array_equal(back.hhat, result.control.hhat)

    def test_control_frame_basis_checked(self, small_config):
        """Cell counts must agree."""
        dspec = DeviationSpec.from_config(small_config)
        frame = control_to_frame(CameronMartinControl.zeros(build_basis(dspec, small_config)))
        with pytest.raises(InvalidInputError):
            control_from_frame(frame, build_basis(dspec, small_config, n_cells=4))

    def test_skeleton_frame(self, small_config):
        """The skeleton frame has a time column and one column per component."""
        config = discrete(small_config)
        result = rate_function(DeviationSpec.from_config(config), config)
        frame = result.skeleton_frame()
        assert list(frame.columns) == ["t", "x_0"]
        assert len(frame) == 33

    def test_refinement_study(self, small_config):
        """The exact kernel gives a rate that does not move under refinement."""
        config = discrete(small_config)
        frame = refinement_study(DeviationSpec.from_config(config), config, factors=(1, 2))
        assert list(frame["n_cells"]) == [8, 16]
        assert np.isnan(frame["relative_change"].iloc[0])
        assert frame["stable"].all()
