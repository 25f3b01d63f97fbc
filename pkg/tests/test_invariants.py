"""Tests for roughdev.devlab.invariants."""

import pytest

from roughdev.core.errors import InvalidInputError, InvariantError
from roughdev.devlab import invariants
from roughdev.devlab.invariants import (
    InvariantResult,
    check_linear_rde,
    check_rde_order,
    run_invariant_checks,
)


class TestInvariantResult:
    """Tests for single results."""

    def test_passed(self):
        """A value at or under tolerance passes; NaN never does."""
        assert InvariantResult("x", 1e-13, 1e-12).passed
        assert not InvariantResult("x", 1e-11, 1e-12).passed
        assert not InvariantResult("x", float("nan"), 1.0).passed


class TestSuite:
    """Tests for the invariant suite."""

    def test_single_scale_passes(self, small_config):
        """Every check applies to the additive scenario except dissipativity, and all pass."""
        frame = run_invariant_checks(small_config)
        assert "dissipativity" not in set(frame["name"])
        assert {"chen", "shuffle", "sewing", "rde-order", "zero-rate", "translation-group"} <= set(
            frame["name"]
        )
        assert frame["passed"].all(), frame.loc[~frame["passed"]].to_string()

    def test_slow_fast_passes(self, slow_fast_config):
        """The slow-fast scenario adds a dissipativity check."""
        frame = run_invariant_checks(slow_fast_config, ["zero-rate", "dissipativity"])
        assert list(frame["name"]) == ["zero-rate", "dissipativity"]
        assert frame["passed"].all(), frame.loc[~frame["passed"]].to_string()

    def test_linear_rde_converges(self, small_config):
        """The closed-form RDE is matched and the error shrinks under refinement."""
        assert check_linear_rde(small_config).passed
        order = check_rde_order(small_config)
        assert order.value < 0.65

    def test_unknown_check(self, small_config):
        """Misspelt names are rejected before anything runs."""
        with pytest.raises(InvalidInputError, match="chenn"):
            run_invariant_checks(small_config, ["chenn"])

    def test_strict_raises(self, small_config, monkeypatch):
        """strict turns a failing check into InvariantError."""
        monkeypatch.setitem(
            invariants.CHECKS, "always-fails", lambda config: InvariantResult("always-fails", 1.0, 0.0)
        )
        frame = run_invariant_checks(small_config, ["chen", "always-fails"])
        assert list(frame["passed"]) == [True, False]
        with pytest.raises(InvariantError) as info:
            run_invariant_checks(small_config, ["chen", "always-fails"], strict=True)
        assert info.value.details["failed"] == ["always-fails"]
