"""Tests for roughdev.rough.algebra."""

import numpy as np
import pytest

from roughdev.core.errors import InvalidInputError
from roughdev.rough.algebra import (
    PiecewiseLinearPath,
    TruncatedTensor,
    chen_levels,
    dilate,
    fold_chen,
    inverse,
    segment_levels,
    segment_signature,
    shuffle_defect,
    signature,
    tensor_exp,
    tensor_mul,
)


def random_tensor(rng, dim, level0=1.0):
    return TruncatedTensor(
        level0,
        rng.normal(size=dim),
        rng.normal(size=(dim, dim)),
        rng.normal(size=(dim, dim, dim)),
    )


def distance(a, b):
    return (a - b).max_abs()


def random_path(rng, n=12, dim=2):
    times = np.sort(np.concatenate([[0.0, 1.0], rng.uniform(0.01, 0.99, size=n - 1)]))
    return PiecewiseLinearPath(times, rng.normal(size=(n + 1, dim)).cumsum(axis=0))


class TestTruncatedTensor:
    """Tests for the truncated tensor product."""

    def test_identity_is_unit(self, rng):
        """The identity element is a two-sided unit."""
        x = random_tensor(rng, 3, level0=0.7)
        one = TruncatedTensor.identity(3)
        assert distance(one * x, x) == 0.0
        assert distance(x * one, x) == 0.0

    def test_product_is_associative(self, rng):
        """(ab)c equals a(bc) up to rounding."""
        a, b, c = (random_tensor(rng, 2, level0=rng.normal()) for _ in range(3))
        assert distance((a * b) * c, a * (b * c)) < 1e-12

    def test_dimension_mismatch(self):
        """Multiplying elements of different dimension is an input error."""
        with pytest.raises(InvalidInputError):
            tensor_mul(TruncatedTensor.identity(2), TruncatedTensor.identity(3))

    def test_inconsistent_levels_rejected(self):
        """Level shapes must agree with the level-1 dimension."""
        with pytest.raises(InvalidInputError):
            TruncatedTensor(1.0, np.zeros(2), np.zeros((3, 3)), np.zeros((2, 2, 2)))

    def test_levels_are_read_only(self, rng):
        """Stored levels cannot be mutated in place."""
        x = random_tensor(rng, 2)
        with pytest.raises(ValueError):
            x.level1[0] = 5.0

    def test_inverse(self, rng):
        """x ⊗ x⁻¹ is the identity for group-like x."""
        x = random_tensor(rng, 3)
        assert distance(x * inverse(x), TruncatedTensor.identity(3)) < 1e-12
        assert distance(inverse(x) * x, TruncatedTensor.identity(3)) < 1e-12

    def test_inverse_needs_unit_scalar(self, rng):
        """The inverse is only defined for level0 == 1."""
        with pytest.raises(InvalidInputError):
            inverse(random_tensor(rng, 2, level0=2.0))

    def test_exp_of_vector_is_segment_signature(self, rng):
        """exp(v) truncated at level 3 is the signature of a straight segment."""
        v = rng.normal(size=3)
        x = TruncatedTensor(0.0, v, np.zeros((3, 3)), np.zeros((3, 3, 3)))
        assert distance(tensor_exp(x), segment_signature(v)) < 1e-13

    def test_exp_needs_zero_scalar(self, rng):
        """tensor_exp rejects elements with a scalar part."""
        with pytest.raises(InvalidInputError):
            tensor_exp(random_tensor(rng, 2, level0=1.0))


class TestSignatures:
    """Tests for exact signatures of piecewise-linear paths."""

    def test_chen_identity(self, rng):
        """S(X)_{s,u} ⊗ S(X)_{u,t} = S(X)_{s,t} to 1e-12."""
        path = random_path(rng)
        for u in (0.13, 0.5, 0.87):
            joined = signature(path, 0.0, u) * signature(path, u, 1.0)
            assert distance(joined, signature(path)) < 1e-12

    def test_shuffle_relations(self, rng):
        """Signatures of geometric paths satisfy the shuffle identities to 1e-10."""
        path = random_path(rng, dim=3)
        assert shuffle_defect(signature(path)) < 1e-10
        assert shuffle_defect(signature(path, 0.2, 0.6)) < 1e-10

    def test_shuffle_defect_detects_non_geometric(self):
        """A level-2 block with the wrong symmetric part is flagged."""
        x = TruncatedTensor(1.0, np.array([1.0, 0.0]), np.eye(2), np.zeros((2, 2, 2)))
        assert shuffle_defect(x) > 0.5

    def test_reversal_gives_inverse(self, rng):
        """Running the path backwards gives the inverse signature to 1e-12."""
        path = random_path(rng)
        back = PiecewiseLinearPath(path.times, path.values[::-1])
        assert distance(signature(back), inverse(signature(path))) < 1e-12

    def test_dilation(self, rng):
        """δ_λ S(v) = S(λv) for a straight segment."""
        v = rng.normal(size=2)
        assert distance(dilate(segment_signature(v), 2.5), segment_signature(2.5 * v)) < 1e-12

    def test_empty_interval(self, rng):
        """The signature over [t, t] is the identity."""
        path = random_path(rng)
        assert distance(signature(path, 0.4, 0.4), TruncatedTensor.identity(2)) == 0.0

    def test_reversed_interval_rejected(self, rng):
        """s > t is an input error."""
        with pytest.raises(InvalidInputError):
            signature(random_path(rng), 0.6, 0.2)

    def test_fold_matches_pairwise_chen(self, rng):
        """Folding blocks equals chaining chen_levels by hand."""
        levels = segment_levels(rng.normal(size=(3, 2)))
        by_hand = chen_levels(
            chen_levels(
                tuple(lv[0] for lv in levels), tuple(lv[1] for lv in levels)
            ),
            tuple(lv[2] for lv in levels),
        )
        for a, b in zip(fold_chen(levels), by_hand):
            np.testing.assert_allclose(a, b, atol=1e-14)


class TestPiecewiseLinearPath:
    """Tests for PiecewiseLinearPath."""

    def test_one_dimensional_values_become_columns(self):
        """A vector of values is read as a 1-d path."""
        path = PiecewiseLinearPath(np.array([0.0, 0.5, 1.0]), np.array([0.0, 1.0, 0.0]))
        assert path.dim == 1
        assert path.n_segments == 2

    def test_value_at_interpolates(self):
        """Values between grid points are linear interpolations."""
        path = PiecewiseLinearPath(np.array([0.0, 1.0]), np.array([[0.0], [2.0]]))
        np.testing.assert_allclose(path.value_at(0.25), [0.5])

    def test_rejects_unsorted_times(self):
        """Times must be strictly increasing."""
        with pytest.raises(InvalidInputError):
            PiecewiseLinearPath(np.array([0.0, 0.5, 0.5]), np.zeros(3))

    def test_rejects_non_finite(self):
        """NaN values are rejected."""
        with pytest.raises(InvalidInputError):
            PiecewiseLinearPath(np.array([0.0, 1.0]), np.array([0.0, np.nan]))

    def test_restrict_keeps_endpoints(self, rng):
        """Restriction interpolates the new endpoints."""
        path = random_path(rng)
        piece = path.restrict(0.3, 0.7)
        np.testing.assert_allclose(piece.values[0], path.value_at(0.3))
        np.testing.assert_allclose(piece.values[-1], path.value_at(0.7))
