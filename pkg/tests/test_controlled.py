"""Tests for roughdev.rough.controlled."""

import numpy as np
import pytest

from roughdev.core.errors import InvalidInputError
from roughdev.core.scenario import CoefficientSpec
from roughdev.rough.algebra import PiecewiseLinearPath
from roughdev.rough.controlled import (
    ControlledPath,
    check_derivatives,
    compose,
    composition_ratio,
    constant,
    finite_difference,
    identity,
    linear,
    remainders,
    rough_integral,
)
from roughdev.rough.roughpath import HolderExponents, from_signature_path
from roughdev.slowfast.palette import build_coefficient


EXPONENTS = HolderExponents(alpha=0.3, beta=0.28, gamma=0.49)


def smooth_lift(n=64):
    times = np.linspace(0.0, 1.0, n + 1)
    values = np.stack([np.sin(2 * np.pi * times), np.cos(3 * times) - 1.0], axis=1)
    return from_signature_path(PiecewiseLinearPath(times, values), EXPONENTS)


def scalar_lift(n=64):
    times = np.linspace(0.0, 1.0, n + 1)
    return from_signature_path(
        PiecewiseLinearPath(times, 0.7 * np.sin(4 * times)[:, None]), EXPONENTS
    )


def path_itself(rp):
    """X as a controlled path: Y† = I, Y†† = 0."""
    n1, d = rp.n_steps + 1, rp.dim
    return ControlledPath(
        rp, rp.path, np.broadcast_to(np.eye(d), (n1, d, d)), np.zeros((n1, d, d, d))
    )


class TestSmoothFunctions:
    """Tests for SmoothFunction4 and its builders."""

    def test_constant_shapes(self):
        """A constant broadcasts over batches and has vanishing derivatives."""
        fn = constant(np.ones((2, 3)), in_dim=2)
        z = np.zeros((5, 2))
        assert fn(z).shape == (5, 2, 3)
        assert fn.grad(z).shape == (5, 2, 3, 2)
        assert np.all(fn.fourth(z) == 0.0)
        assert fn.lipschitz == 0.0

    def test_linear_value_and_gradient(self):
        """z ↦ Mz + b with gradient M."""
        m = np.array([[1.0, 2.0], [0.0, -1.0]])
        fn = linear(m, offset=[1.0, 1.0])
        np.testing.assert_allclose(fn([1.0, 1.0]), [4.0, 0.0])
        np.testing.assert_allclose(fn.grad(np.zeros((3, 2))), np.broadcast_to(m, (3, 2, 2)))

    def test_linear_needs_matrix(self):
        """A vector is not a linear map."""
        with pytest.raises(InvalidInputError):
            linear(np.ones(3))

    def test_identity(self):
        """identity(d) returns its input."""
        z = np.arange(6.0).reshape(2, 3)
        np.testing.assert_allclose(identity(3)(z), z)

    def test_derivative_order_checked(self):
        """Only derivatives 0..4 exist."""
        with pytest.raises(InvalidInputError):
            identity(2).derivative(5, np.zeros(2))

    def test_palette_derivatives_are_consistent(self):
        """Analytic derivatives of palette coefficients agree with differences."""
        sine = build_coefficient(
            CoefficientSpec(kind="sine", params={"amplitude": 0.5, "frequency": 2.0}), 2, (2,)
        )
        poly = build_coefficient(
            CoefficientSpec(kind="polynomial", params={"coefficients": [0.0, 1.0, -0.5, 0.2]}),
            1,
            (1,),
        )
        points = np.array([[0.3, -0.2], [1.1, 0.4]])
        for report in (check_derivatives(sine, points), check_derivatives(poly, points[:, :1])):
            assert max(report.values()) < 1e-6

    def test_finite_difference_adapter(self, caplog):
        """Wrapped callables get numerical derivatives and a warning."""
        fn = finite_difference(lambda z: np.sin(z), 1, (1,), name="sin")
        assert "finite differences" in caplog.text
        assert not fn.exact
        z = np.array([[0.4]])
        assert fn.grad(z)[0, 0, 0] == pytest.approx(np.cos(0.4), abs=1e-8)
        assert fn.hess(z)[0, 0, 0, 0] == pytest.approx(-np.sin(0.4), abs=1e-5)

    def test_estimated_bound_for_linear(self):
        """Without a recorded bound the C⁴ norm is sampled: |Mz + b| + |M|."""
        fn = linear(np.array([[2.0]]))
        est = fn.estimate_bound(center=0.0, radius=1.0)
        assert 2.0 < est <= 4.0
        assert fn.estimate_lipschitz() == pytest.approx(2.0)


class TestControlledPath:
    """Tests for controlled paths and their remainders."""

    def test_shape_validation(self):
        """Gubinelli derivatives must carry the driver dimension."""
        rp = smooth_lift()
        n1 = rp.n_steps + 1
        with pytest.raises(InvalidInputError):
            ControlledPath(rp, rp.path, np.zeros((n1, 2, 3)), np.zeros((n1, 2, 2, 2)))

    def test_path_itself_has_zero_remainders(self):
        """Y = X with Y† = I leaves nothing in Y♯ or Y♯♯."""
        rep = remainders(path_itself(smooth_lift()))
        assert rep.norm_sharp < 1e-12
        assert rep.norm_sharpsharp < 1e-12
        assert rep.ddag_holder == 0.0
        assert rep.controlled_norm == pytest.approx(np.sqrt(2.0))

    def test_right_variant_matches_for_constant_second_derivative(self):
        """With Y†† constant both remainder variants coincide."""
        cp = path_itself(smooth_lift())
        left = remainders(cp, "left")
        right = remainders(cp, "right")
        assert left.norm_sharp == pytest.approx(right.norm_sharp, abs=1e-14)

    def test_compose_with_linear_map(self):
        """Φ(Y) = MY has Z† = M Y† and Z†† = M Y††."""
        cp = path_itself(smooth_lift())
        m = np.array([[1.0, 2.0], [3.0, -1.0]])
        z = compose(linear(m), cp)
        np.testing.assert_allclose(z.y, cp.y @ m.T)
        np.testing.assert_allclose(z.y_dag[0], m)
        assert np.all(z.y_ddag == 0.0)

    def test_compose_second_derivative(self):
        """Z†† picks up ∇²Φ(Y†, Y†): for Φ(y) = y² on Y = X it is 2."""
        rp = scalar_lift()
        square = build_coefficient(
            CoefficientSpec(kind="polynomial", params={"coefficients": [0.0, 0.0, 1.0]}), 1, (1,)
        )
        z = compose(square, path_itself(rp))
        np.testing.assert_allclose(z.y[:, 0], rp.path[:, 0] ** 2)
        np.testing.assert_allclose(z.y_ddag[:, 0, 0, 0], 2.0)

    def test_compose_dimension_checked(self):
        """Φ must accept the path's values."""
        with pytest.raises(InvalidInputError):
            compose(identity(3), path_itself(smooth_lift()))

    def test_composition_ratio_is_finite(self):
        """The stability ratio of a smooth composition is a finite positive number."""
        ratio = composition_ratio(identity(2), path_itself(smooth_lift()))
        assert 0.0 < ratio < np.inf


class TestRoughIntegral:
    """Tests for the third-order rough integral and sewing diagnostics."""

    def test_integral_of_constant(self):
        """∫ 1 dX = X_t − X_0."""
        rp = scalar_lift()
        n1 = rp.n_steps + 1
        cp = ControlledPath(rp, np.ones((n1, 1)), np.zeros((n1, 1, 1)), np.zeros((n1, 1, 1, 1)))
        z, _ = rough_integral(cp)
        np.testing.assert_allclose(z.y, rp.path[:, 0] - rp.path[0, 0], atol=1e-14)

    def test_geometric_chain_rule(self):
        """∫ X dX = (X_t² − X_0²) / 2 for a geometric scalar lift."""
        rp = scalar_lift()
        z, _ = rough_integral(path_itself(rp), z0=0.0)
        np.testing.assert_allclose(z.y, 0.5 * (rp.path[:, 0] ** 2 - rp.path[0, 0] ** 2), atol=1e-13)

    def test_integral_derivatives(self):
        """The integral is controlled with Z† = Y."""
        cp = path_itself(smooth_lift())
        z, _ = rough_integral(cp)
        np.testing.assert_allclose(z.y_dag, cp.y)

    def test_sewing_bound_holds_everywhere(self):
        """Local errors stay under the sewing bound on every grid pair."""
        _, diag = rough_integral(path_itself(smooth_lift()), diagnostics=True)
        assert diag is not None
        assert diag.fraction_within == 1.0
        assert diag.n_pairs == 64 * 65 // 2

    def test_integrand_must_end_in_driver_dimension(self):
        """Values of shape (..., d) are required."""
        rp = smooth_lift()
        n1 = rp.n_steps + 1
        cp = ControlledPath(rp, np.ones((n1, 3)), np.zeros((n1, 3, 2)), np.zeros((n1, 3, 2, 2)))
        with pytest.raises(InvalidInputError):
            rough_integral(cp)
