import numpy as np
import pytest
from scipy import linalg

from ..services.cutoff_service import make_cutoff
from ..services.frame_service import (CoefficientSet, build_dual, build_frame, build_frame1,
                                      build_tight, count_growth_exponent, element_norm_band,
                                      frame_bounds, kernel_identity_residual, level_count_ratios,
                                      neumann_inverse, reconstruction_error, transform)
from ..services.model_space_service import SpectralModel
from ..models.errors import ConfigurationError, ContractError
from ..models.spectral_data import (CutoffKind, FrameVariant, Provenance, SpaceKind,
                                    TransformDirection)


def torus_setup(N=64):
    return SpectralModel(SpaceKind.TORUS, N), make_cutoff(CutoffKind.TYPE_A, b=2.0)


class TestFrameOne:
    @classmethod
    def setup_class(cls):
        cls.model, cls.phi = torus_setup()
        cls.frame = build_frame1(cls.model, cls.phi, 2.0, 3)

    def test_level_sizes_double(self):
        assert self.frame.level_sizes == [4, 8, 16, 32]
        assert self.frame.size == 60
        assert self.frame.band == 8.0

    def test_bounds_between_half_and_one(self):
        report = frame_bounds(self.frame, trials=50, seed=1)
        assert report.lower_hat >= 0.5 - 1e-12
        assert report.upper_hat <= 1.0 + 1e-12

    def test_count_ratios_constant(self):
        np.testing.assert_allclose(level_count_ratios(self.frame), 4.0)

    def test_no_dual_for_analysis(self):
        assert not self.frame.has_dual
        with pytest.raises(ContractError):
            transform(self.frame, np.ones(self.model.size), TransformDirection.ANALYZE_DUAL)

    def test_primal_analysis(self):
        f = np.zeros(self.model.size)
        f[0] = 1.0
        coefficients = transform(self.frame, f, TransformDirection.ANALYZE_PRIMAL)
        assert coefficients.provenance == Provenance.ANALYSIS_PRIMAL
        assert coefficients.values.shape == (60,)
        np.testing.assert_allclose(coefficients.values[4:], 0.0, atol=1e-14)

    def test_truncation_too_small(self):
        model = SpectralModel(SpaceKind.TORUS, 2)
        with pytest.raises(ConfigurationError):
            build_frame1(model, self.phi, 2.0, 3)


class TestTorusDual:
    @classmethod
    def setup_class(cls):
        cls.model, cls.phi = torus_setup()
        cls.frame = build_frame(cls.model, cls.phi, 2.0, 3, FrameVariant.DUAL)

    def test_exact_sampling_gives_zero_residual(self):
        for level in self.frame.levels:
            assert level.residual_norm < 1e-12
            assert level.sampling_epsilon < 1e-12
            assert level.epsilon_effective == level.residual_norm / 2

    def test_reconstruction(self):
        rng = np.random.default_rng(0)
        for _ in range(10):
            assert reconstruction_error(self.frame, self.frame.random_function(rng)) < 1e-10

    @pytest.mark.parametrize("j", [0, 1, 2, 3])
    def test_kernel_identity(self, j):
        assert kernel_identity_residual(self.frame, j, pairs=50) < 1e-9

    def test_dual_bounds_finite(self):
        report = frame_bounds(self.frame, trials=20, which="dual")
        assert 0 < report.lower_hat <= report.upper_hat < np.inf

    def test_tight_frames_are_self_dual(self):
        tight = build_tight(self.model, self.phi, 2.0, 2)
        with pytest.raises(ContractError):
            build_dual(tight)


class TestJacobiDual:
    @classmethod
    def setup_class(cls):
        cls.model = SpectralModel(SpaceKind.JACOBI, 32, alpha=0.5, beta=0.0)
        cls.phi = make_cutoff(CutoffKind.TYPE_A, b=2.0)
        cls.frame = build_frame(cls.model, cls.phi, 2.0, 2, FrameVariant.DUAL, gamma="auto")

    def test_residuals_below_half(self):
        for level in self.frame.levels:
            assert level.sampling_epsilon <= 0.1 + 1e-12
            assert level.residual_norm <= 2 * 0.1 / 1.1 + 1e-12
            assert 0 < level.gamma <= 1.0

    def test_reconstruction(self):
        rng = np.random.default_rng(3)
        for _ in range(10):
            assert reconstruction_error(self.frame, self.frame.random_function(rng)) < 1e-8

    def test_neumann_series_matches_inverse(self):
        for level in self.frame.levels:
            direct = linalg.inv(np.eye(level.active.size) - level.residual)
            np.testing.assert_allclose(neumann_inverse(level.residual), direct, atol=1e-10)

    def test_inverse_sandwich(self):
        for level in self.frame.levels:
            eigenvalues = linalg.eigvalsh(linalg.inv(np.eye(level.active.size) - level.residual))
            assert eigenvalues.min() >= 1 - 1e-12
            assert eigenvalues.max() <= 1 / (1 - level.residual_norm) + 1e-12

    @pytest.mark.parametrize("j", [0, 1, 2])
    def test_kernel_identity(self, j):
        assert kernel_identity_residual(self.frame, j, pairs=50) < 1e-9


class TestLegendre:
    @classmethod
    def setup_class(cls):
        cls.model = SpectralModel(SpaceKind.JACOBI, 32)
        cls.phi = make_cutoff(CutoffKind.TYPE_A, b=2.0)
        cls.dual = build_frame(cls.model, cls.phi, 2.0, 2, FrameVariant.DUAL, gamma="auto")
        cls.tight = build_frame(cls.model, cls.phi, 2.0, 2, FrameVariant.TIGHT, gamma="auto")

    def test_dual_reconstruction(self):
        rng = np.random.default_rng(8)
        for _ in range(10):
            assert reconstruction_error(self.dual, self.dual.random_function(rng)) < 1e-8

    def test_tight_parseval(self):
        report = frame_bounds(self.tight, trials=30, seed=9)
        assert report.lower_hat == pytest.approx(1.0, abs=1e-9)
        assert report.upper_hat == pytest.approx(1.0, abs=1e-9)

    def test_tight_synthesis_inverts_analysis(self):
        rng = np.random.default_rng(10)
        f = self.tight.random_function(rng)
        coefficients = transform(self.tight, f, TransformDirection.ANALYZE_DUAL)
        np.testing.assert_allclose(transform(self.tight, coefficients, TransformDirection.SYNTHESIZE),
                                   f, atol=1e-9)

    def test_counts_grow_with_the_arccos_metric(self):
        # nets are uniform in arccos x, so counts double per level although d_hat is near 2
        model = SpectralModel(SpaceKind.JACOBI, 128)
        frame = build_frame1(model, self.phi, 2.0, 2)
        growth = count_growth_exponent(frame)
        assert growth == pytest.approx(1.0, abs=0.25)
        assert growth < model.dim_d
        ratios = level_count_ratios(frame)
        assert ratios.max() <= 2 * ratios.min()


class TestTight:
    @classmethod
    def setup_class(cls):
        cls.model, cls.phi = torus_setup()
        cls.frame = build_tight(cls.model, cls.phi, 2.0, 3)

    def test_parseval(self):
        report = frame_bounds(self.frame, trials=50, seed=2)
        assert report.lower_hat == pytest.approx(1.0, abs=1e-12)
        assert report.upper_hat == pytest.approx(1.0, abs=1e-12)

    def test_cubature_weights_equal_cells(self):
        for level in self.frame.levels:
            np.testing.assert_allclose(level.net.weights, level.net.cell_measures, atol=1e-14)
            assert level.net.cubature.bracket_ok

    def test_synthesis_inverts_analysis(self):
        rng = np.random.default_rng(5)
        f = self.frame.random_function(rng)
        coefficients = transform(self.frame, f, TransformDirection.ANALYZE_DUAL)
        np.testing.assert_allclose(transform(self.frame, coefficients, TransformDirection.SYNTHESIZE),
                                   f, atol=1e-12)

    def test_grid_values_accepted(self):
        rng = np.random.default_rng(6)
        f = self.frame.random_function(rng)
        from_grid = transform(self.frame, self.model.synthesize(f), TransformDirection.ANALYZE_DUAL)
        from_coefficients = transform(self.frame, f, TransformDirection.ANALYZE_DUAL)
        np.testing.assert_allclose(from_grid.values, from_coefficients.values, atol=1e-12)

    def test_mismatched_coefficients_rejected(self):
        wrong = CoefficientSet(values=np.zeros(10), provenance=Provenance.SYNTHETIC, level_sizes=(10,))
        with pytest.raises(ContractError):
            transform(self.frame, wrong, TransformDirection.SYNTHESIZE)
        with pytest.raises(ContractError):
            transform(self.frame, np.zeros(7), TransformDirection.ANALYZE_DUAL)

    def test_empty_level_has_zero_elements(self):
        # 2 pi > b^2, so no torus eigenvalue lies under Psi_1
        assert self.frame.element_norms(2.0)[self.frame.levels[1].slice].max() == 0.0
        assert element_norm_band(self.frame, 2.0)["max"] > 0

    @pytest.mark.parametrize("j", [0, 2, 3])
    def test_kernel_identity(self, j):
        assert kernel_identity_residual(self.frame, j, pairs=50) < 1e-9
