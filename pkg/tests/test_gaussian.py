"""Tests for roughdev.gaussian: sampling, lifts and Cameron–Martin controls."""

import numpy as np
import pytest
from pydantic import ValidationError
from scipy import integrate

import roughdev.gaussian.cameron_martin as cm
from roughdev.core import GaussianConfig
from roughdev.core.errors import InvalidInputError, InvariantError
from roughdev.core.scenario import LiftMode
from roughdev.gaussian.cameron_martin import (
    CameronMartinBasis,
    CameronMartinControl,
    cell_edges,
    cm_lift,
    cm_to_path,
    dyadic_approximation,
    dyadic_convergence,
    molchan_kernel,
    terminal_value_oracle,
    translate,
)
from roughdev.gaussian.lift import (
    MixedLift,
    cross_integral,
    lift_fbm,
    lift_mixed,
    lift_mixed_batch,
)
from roughdev.gaussian.sampling import (
    FBM_STREAM,
    FbmSpec,
    fbm_covariance,
    sample_bm_batch,
    sample_fbm,
    sample_fbm_batch,
    sample_mixed_batch,
    trajectory_rng,
)
from roughdev.rough.algebra import PiecewiseLinearPath
from roughdev.rough.roughpath import HolderExponents, from_signature_path, max_shuffle_defect


EXPONENTS = HolderExponents.for_hurst(0.3)


def within_three_stderr(samples, target):
    var = float(np.mean(samples**2))
    stderr = float(np.std(samples**2, ddof=1)) / np.sqrt(samples.shape[0])
    return abs(var - target) <= 3.0 * stderr


class TestFbmSampling:
    """Tests for seeded fBM and BM sampling."""

    def test_hurst_range(self):
        """H must lie in (1/4, 1/3) unless test mode admits 1/2."""
        with pytest.raises(ValidationError):
            FbmSpec(hurst=0.4)
        assert FbmSpec(hurst=0.5, test_mode=True).hurst == 0.5
        with pytest.raises(ValidationError):
            GaussianConfig(hurst=0.2)

    def test_covariance(self):
        """R_H is symmetric with diagonal t^{2H}."""
        t = np.linspace(0.1, 1.0, 5)
        cov = fbm_covariance(t[:, None], t[None, :], 0.3)
        np.testing.assert_allclose(cov, cov.T)
        np.testing.assert_allclose(np.diag(cov), t**0.6)

    def test_streams_are_independent_and_reproducible(self):
        """Each (seed, index, stream) has its own generator."""
        a = trajectory_rng(3, 7, FBM_STREAM).standard_normal(4)
        b = trajectory_rng(3, 7, FBM_STREAM).standard_normal(4)
        c = trajectory_rng(3, 7, FBM_STREAM + 1).standard_normal(4)
        np.testing.assert_array_equal(a, b)
        assert not np.allclose(a, c)

    def test_chunking_does_not_change_paths(self):
        """Sampling indices 0..9 at once or in two chunks gives identical bytes."""
        spec = FbmSpec(hurst=0.3, dim=2, n_steps=16)
        whole = sample_fbm_batch(spec, 42, range(10))
        parts = np.concatenate(
            [sample_fbm_batch(spec, 42, range(5)), sample_fbm_batch(spec, 42, range(5, 10))]
        )
        assert whole.tobytes() == parts.tobytes()

    def test_single_path(self):
        """sample_fbm starts at zero on the FbmSpec grid."""
        spec = FbmSpec(hurst=0.3, n_steps=8, horizon=2.0)
        path = sample_fbm(spec, seed=1, index=3)
        np.testing.assert_allclose(path.times, np.linspace(0.0, 2.0, 9))
        assert path.values[0, 0] == 0.0

    @pytest.mark.parametrize("hurst", [0.26, 0.30])
    def test_increment_variance(self, hurst):
        """E[(b_t − b_s)²] = |t − s|^{2H} within three standard errors."""
        spec = FbmSpec(hurst=hurst, n_steps=32)
        values = sample_fbm_batch(spec, 2024, range(10_000))[:, :, 0]
        rng = np.random.default_rng(5)
        for _ in range(5):
            i, j = np.sort(rng.choice(33, size=2, replace=False))
            inc = values[:, j] - values[:, i]
            assert within_three_stderr(inc, (spec.times[j] - spec.times[i]) ** (2 * hurst))

    def test_circulant_embedding_variance(self, caplog):
        """Above the Cholesky limit the circulant sampler is used and keeps the variance."""
        spec = FbmSpec(hurst=0.3, n_steps=64, cholesky_max=8)
        values = sample_fbm_batch(spec, 9, range(4000))[:, :, 0]
        assert "circulant embedding" in caplog.text
        assert within_three_stderr(values[:, -1], 1.0)

    def test_brownian_variance(self):
        """BM has Var(w_T) = T."""
        times = np.linspace(0.0, 2.0, 17)
        values = sample_bm_batch(times, 1, 8, range(4000))[:, -1, 0]
        assert within_three_stderr(values, 2.0)

    def test_mixed_batch(self):
        """The mixed sampler returns the BM block only when dim_bm > 0."""
        config = GaussianConfig(hurst=0.3, n_steps=8, dim_bm=2)
        times, fbm, bm = sample_mixed_batch(config, 1, [0, 1])
        assert fbm.shape == (2, 9, 1)
        assert bm is not None and bm.shape == (2, 9, 2)
        _, _, none = sample_mixed_batch(GaussianConfig(hurst=0.3, n_steps=8), 1, [0])
        assert none is None


class TestLifts:
    """Tests for lifts of fBM and the mixed pair."""

    def grid(self, rng, n=6):
        times = np.linspace(0.0, 1.0, n + 1)
        fbm = PiecewiseLinearPath(times, np.vstack([[0.0], rng.normal(size=(n, 1)).cumsum(0)]))
        bm = PiecewiseLinearPath(times, np.vstack([[0.0], rng.normal(size=(n, 1)).cumsum(0)]))
        return fbm, bm

    def test_fbm_lift_is_geometric(self, rng):
        """The canonical lift passes the shuffle check."""
        fbm, _ = self.grid(rng)
        assert lift_fbm(fbm, EXPONENTS).geometric

    def test_geometric_cross_integrals(self, rng):
        """I[b, w] + I[w, b] = Δb Δw for the geometric lift."""
        fbm, bm = self.grid(rng)
        lift = lift_mixed(fbm, bm, EXPONENTS, LiftMode.GEOMETRIC)
        bw = lift.cross(0.0, 1.0, "bw")
        wb = lift.cross(0.0, 1.0, "wb")
        db = fbm.values[-1] - fbm.values[0]
        dw = bm.values[-1] - bm.values[0]
        assert bw[0, 0] + wb[0, 0] == pytest.approx(db[0] * dw[0])

    def test_ito_cross_integral_is_forward_sum(self, rng):
        """The Itô-cross lift gives I[b, w] = Σ_{i<j} Δb_i Δw_j and stays geometric."""
        fbm, bm = self.grid(rng)
        lift = lift_mixed(fbm, bm, EXPONENTS, "ito-cross")
        assert lift.mode is LiftMode.ITO_CROSS
        assert lift.rough_path.geometric and not lift.rough_path.piecewise_linear
        db = np.diff(fbm.values[:, 0])
        dw = np.diff(bm.values[:, 0])
        forward = sum(db[i] * dw[j] for i in range(6) for j in range(i + 1, 6))
        assert lift.cross(0.0, 1.0, "bw")[0, 0] == pytest.approx(forward)

    def test_blocks_are_the_single_lifts(self, rng):
        """Either mode projects onto the lifts of b^H and of w alone."""
        fbm, bm = self.grid(rng)
        for mode in LiftMode:
            lift = lift_mixed(fbm, bm, EXPONENTS, mode)
            assert (lift.dim_fbm, lift.dim_bm) == (1, 1)
            np.testing.assert_allclose(lift.fbm.block3, lift_fbm(fbm, EXPONENTS).block3, atol=1e-14)
            np.testing.assert_allclose(lift.bm.block2, lift_fbm(bm, EXPONENTS).block2, atol=1e-14)

    def test_lift_without_bm(self, rng):
        """Without a BM the lift is the fBM lift and has no cross integrals."""
        fbm, _ = self.grid(rng)
        lift = lift_mixed(fbm, None, EXPONENTS)
        assert lift.dim_bm == 0 and lift.bm is None
        with pytest.raises(InvalidInputError):
            lift.cross(0.0, 1.0)

    def test_cross_integral_arguments(self, rng):
        """The split must fall inside the lift and the order must be bw or wb."""
        fbm, bm = self.grid(rng)
        rp = lift_mixed(fbm, bm, EXPONENTS).rough_path
        with pytest.raises(InvalidInputError):
            cross_integral(rp, 2, 0.0, 1.0)
        with pytest.raises(InvalidInputError):
            cross_integral(rp, 1, 0.0, 1.0, "ww")
        with pytest.raises(InvalidInputError):
            MixedLift(rp, 3)

    def test_batch_scale_dilates(self, rng):
        """A scaled batch lift is the dilation of the unscaled one."""
        fbm, bm = self.grid(rng)
        f, b = fbm.values[None], bm.values[None]
        plain = lift_mixed_batch(fbm.times, f, b, EXPONENTS)
        scaled = lift_mixed_batch(fbm.times, f, b, EXPONENTS, scale=0.5)
        for k in range(3):
            np.testing.assert_allclose(scaled.levels[k], 0.5 ** (k + 1) * plain.levels[k])


class TestCameronMartin:
    """Tests for the kernel, bases and controls."""

    def test_brownian_kernel(self):
        """At H = 1/2 the kernel is the indicator of s < t."""
        np.testing.assert_array_equal(molchan_kernel(1.0, np.array([0.5, 1.5]), 0.5), [1.0, 0.0])

    def test_kernel_reproduces_variance(self):
        """∫₀ᵗ K_H(t, s)² ds = t^{2H}."""
        squared = lambda s: float(molchan_kernel(1.0, s, 0.3)) ** 2  # noqa: E731
        val, _ = integrate.quad(squared, 0.0, 1.0, limit=400)
        assert val == pytest.approx(1.0, rel=1e-3)

    def test_kernel_reproduces_covariance(self):
        """∫ K_H(t, r) K_H(s, r) dr = R_H(s, t)."""
        val, _ = integrate.quad(
            lambda r: float(molchan_kernel(1.0, r, 0.3) * molchan_kernel(0.5, r, 0.3)),
            0.0,
            0.5,
            limit=400,
        )
        assert val == pytest.approx(float(fbm_covariance(0.5, 1.0, 0.3)), rel=1e-3)

    def test_cell_edges(self):
        """Graded cells are symmetric and finer at the endpoints."""
        edges = cell_edges(1.0, 8)
        assert edges[0] == 0.0 and edges[-1] == 1.0
        widths = np.diff(edges)
        np.testing.assert_allclose(widths, widths[::-1])
        assert widths[0] < widths[4]
        np.testing.assert_allclose(cell_edges(2.0, 4, "uniform"), [0.0, 0.5, 1.0, 1.5, 2.0])

    def test_discrete_kernel_oracle_is_exact(self):
        """With the discrete kernel the terminal oracle is a² / (2 T^{2H})."""
        times = np.linspace(0.0, 1.0, 33)
        basis = CameronMartinBasis.build(0.3, times, 8, 1, kernel="discrete")
        rate, ctrl = terminal_value_oracle(basis, 1.5)
        assert rate == pytest.approx(1.5**2 / 2.0, rel=1e-10)
        assert ctrl.u_values()[-1, 0] == pytest.approx(1.5)
        assert ctrl.half_norm_sq == pytest.approx(rate)

    def test_volterra_oracle_approaches_closed_form(self):
        """On graded cells the Volterra basis loses under 2% of the variance."""
        times = np.linspace(0.0, 1.0, 33)
        basis = CameronMartinBasis.build(0.3, times, 16, 1)
        rate, ctrl = terminal_value_oracle(basis, 1.0)
        assert 0.5 <= rate <= 0.5 * 1.02
        assert ctrl.u_values()[-1, 0] == pytest.approx(1.0)

    def test_vector_round_trip(self):
        """Controls flatten to ĥ then v′."""
        basis = CameronMartinBasis.build(0.3, np.linspace(0.0, 1.0, 9), 4, 1, 1, kernel="discrete")
        theta = np.arange(8.0)
        ctrl = CameronMartinControl.from_vector(basis, theta)
        np.testing.assert_array_equal(ctrl.hhat[:, 0], [0, 1, 2, 3])
        np.testing.assert_array_equal(ctrl.to_vector(), theta)
        with pytest.raises(InvalidInputError):
            CameronMartinControl.from_vector(basis, np.zeros(3))

    def test_bm_component(self):
        """v = ∫ v′ and the cost is ½‖v′‖²."""
        times = np.linspace(0.0, 1.0, 9)
        basis = CameronMartinBasis.build(0.3, times, 4, 1, 1, kernel="discrete", layout="uniform")
        ctrl = CameronMartinControl(basis, np.zeros((4, 1)), np.full((4, 1), 2.0))
        np.testing.assert_allclose(ctrl.v_values()[:, 0], 2.0 * times)
        assert ctrl.half_norm_sq == pytest.approx(2.0)
        assert ctrl.vprime_at(0.3)[0] == 2.0

    def test_refinement_keeps_functions(self):
        """Refining a control keeps u, v and the cost."""
        times = np.linspace(0.0, 1.0, 17)
        basis = CameronMartinBasis.build(0.3, times, 4, 1, 1, kernel="discrete", layout="uniform")
        ctrl = CameronMartinControl(basis, np.zeros((4, 1)), np.arange(4.0)[:, None])
        fine = ctrl.refined(2)
        assert fine.basis.n_cells == 8
        assert fine.half_norm_sq == pytest.approx(ctrl.half_norm_sq)
        np.testing.assert_allclose(fine.v_values(), ctrl.v_values(), atol=1e-14)

    def test_zero_control(self):
        """The zero control costs nothing and leaves a lift unchanged."""
        times = np.linspace(0.0, 1.0, 9)
        basis = CameronMartinBasis.build(0.3, times, 4, 1, kernel="discrete")
        zero = CameronMartinControl.zeros(basis)
        assert zero.half_norm_sq == 0.0
        rp = from_signature_path(PiecewiseLinearPath(times, np.sin(times)[:, None]), EXPONENTS)
        moved = translate(rp, zero)
        np.testing.assert_allclose(moved.path, rp.path)

    def test_translation_matches_lift_of_sum(self, rng):
        """T^{(u)} of a fBM lift is the lift of b + u."""
        spec = FbmSpec(hurst=0.3, n_steps=16)
        fbm = sample_fbm(spec, seed=4)
        basis = CameronMartinBasis.build(0.3, spec.times, 4, 1, kernel="discrete")
        ctrl = CameronMartinControl(basis, rng.normal(size=(4, 1)), np.zeros((4, 0)))
        moved = translate(lift_fbm(fbm, EXPONENTS), ctrl, scale=0.5)
        direct = lift_fbm(
            PiecewiseLinearPath(spec.times, fbm.values + 0.5 * ctrl.u_values()), EXPONENTS
        )
        np.testing.assert_allclose(moved.block2, direct.block2, atol=1e-9)
        np.testing.assert_allclose(moved.block3, direct.block3, atol=1e-9)
        assert max_shuffle_defect(moved) < 1e-9

    def ito_lift(self, rng, n=16):
        times = np.linspace(0.0, 1.0, n + 1)
        fbm = PiecewiseLinearPath(times, np.vstack([[0.0], rng.normal(size=(n, 1)).cumsum(0)]))
        bm = PiecewiseLinearPath(times, np.vstack([[0.0], rng.normal(size=(n, 1)).cumsum(0)]))
        basis = CameronMartinBasis.build(0.3, times, 4, 1, 1, kernel="discrete", layout="uniform")
        return lift_mixed(fbm, bm, EXPONENTS, LiftMode.ITO_CROSS).rough_path, basis

    def test_translations_compose_on_ito_lift(self, rng):
        """T^{h2} T^{h1} X = T^{h1+h2} X for the Itô-cross lift, at every level."""
        rp, basis = self.ito_lift(rng)
        c1 = CameronMartinControl(basis, rng.normal(size=(4, 1)), rng.normal(size=(4, 1)))
        c2 = CameronMartinControl(basis, rng.normal(size=(4, 1)), rng.normal(size=(4, 1)))
        both = CameronMartinControl(basis, c1.hhat + c2.hhat, c1.vprime + c2.vprime)
        twice = translate(translate(rp, c1), c2)
        once = translate(rp, both)
        np.testing.assert_allclose(twice.path, once.path, atol=1e-12)
        np.testing.assert_allclose(twice.block2, once.block2, atol=1e-8)
        np.testing.assert_allclose(twice.block3, once.block3, atol=1e-8)
        assert max_shuffle_defect(once, sample_pairs=10) <= 1e-8

    def test_opposite_control_undoes_translation(self, rng):
        """T^{−h} T^h X = X for the Itô-cross lift."""
        rp, basis = self.ito_lift(rng)
        ctrl = CameronMartinControl(basis, rng.normal(size=(4, 1)), rng.normal(size=(4, 1)))
        back = translate(translate(rp, ctrl), ctrl, scale=-1.0)
        np.testing.assert_allclose(back.path, rp.path, atol=1e-12)
        np.testing.assert_allclose(back.block2, rp.block2, atol=1e-8)
        np.testing.assert_allclose(back.block3, rp.block3, atol=1e-8)

    def test_zero_control_keeps_ito_lift(self, rng):
        """The zero control leaves every block of the lift in place."""
        rp, basis = self.ito_lift(rng)
        moved = translate(rp, CameronMartinControl.zeros(basis))
        np.testing.assert_allclose(moved.block3, rp.block3, atol=1e-15)

    def test_translation_dimension_checked(self):
        """A lift must match the fBM part or the whole control."""
        times = np.linspace(0.0, 1.0, 9)
        basis = CameronMartinBasis.build(0.3, times, 4, 1, kernel="discrete")
        ctrl = CameronMartinControl.zeros(basis)
        rp = from_signature_path(PiecewiseLinearPath(times, np.zeros((9, 3))), EXPONENTS)
        with pytest.raises(InvalidInputError):
            translate(rp, ctrl)

    def test_control_lift(self):
        """cm_lift lifts (u, v) as a geometric path."""
        times = np.linspace(0.0, 1.0, 9)
        basis = CameronMartinBasis.build(0.3, times, 4, 1, 1, kernel="discrete")
        ctrl = CameronMartinControl(basis, np.ones((4, 1)), np.ones((4, 1)))
        assert cm_to_path(ctrl).dim == 2
        assert cm_lift(ctrl, EXPONENTS).geometric

    def test_dyadic_convergence(self):
        """Dyadic interpolations approach the control path in rough-path distance."""
        times = np.linspace(0.0, 1.0, 65)
        basis = CameronMartinBasis.build(0.3, times, 8, 1, kernel="discrete", layout="uniform")
        ctrl = CameronMartinControl(basis, np.linspace(-1.0, 1.0, 8)[:, None], np.zeros((8, 0)))
        frame = dyadic_convergence(ctrl, EXPONENTS, levels=(2, 3, 4, 6))
        assert list(frame["level"]) == [2, 3, 4, 6]
        assert frame["distance"].iloc[-1] == pytest.approx(0.0, abs=1e-12)
        assert frame["distance"].iloc[0] > frame["distance"].iloc[-1]

    def test_dyadic_approximation_keeps_nodes(self):
        """The approximation agrees with the path at the dyadic points."""
        times = np.linspace(0.0, 1.0, 17)
        path = PiecewiseLinearPath(times, np.sin(5 * times)[:, None])
        approx = dyadic_approximation(path, 2)
        np.testing.assert_allclose(approx.values[::4], path.values[::4])

    def test_failed_shuffle_check_raises(self, monkeypatch):
        """A translated path that fails the shuffle check raises."""
        times = np.linspace(0.0, 1.0, 9)
        basis = CameronMartinBasis.build(0.3, times, 4, 1, kernel="discrete")
        rp = from_signature_path(PiecewiseLinearPath(times, np.sin(times)[:, None]), EXPONENTS)
        monkeypatch.setattr(cm, "max_shuffle_defect", lambda path: 1.0)
        with pytest.raises(InvariantError):
            translate(rp, CameronMartinControl.zeros(basis))
