import numpy as np
import pytest

from ..services.cutoff_service import make_cutoff
from ..services.model_space_service import SpectralModel
from ..services.spectral_service import (KernelOperator, band_limited_wave_multiplier, compose_check,
                                         davies_gaffney_constant, finite_speed_residual, fit_envelope,
                                         gaussian_multiplier, heat_operator, kernel_norm_band,
                                         localization_report, markov_residual, nikolskii_exponent,
                                         power_multiplier, subadditivity_violations)
from ..models.errors import FitError, ParameterError, SpectralDomainError
from ..models.spectral_data import CutoffKind, EnvelopeForm, SpaceKind


class TestKernelOperator:
    def setup_method(self):
        self.model = SpectralModel(SpaceKind.TORUS, 64)
        self.phi = make_cutoff(CutoffKind.TYPE_A, b=2.0)

    def test_multipliers_are_sampled_at_scaled_roots(self):
        op = KernelOperator(self.model, self.phi, 0.05)
        np.testing.assert_allclose(op.multipliers, self.phi(0.05 * self.model.sqrt_eigenvalues))
        assert op.band <= 2.0 / 0.05 + 1e-9

    def test_kernel_is_symmetric(self):
        op = heat_operator(self.model, 0.01)
        x = np.array([0.1, 0.37, 0.8])
        np.testing.assert_allclose(op.kernel(x, x), op.kernel(x, x).T, atol=1e-12)

    def test_rejects_nonpositive_delta(self):
        with pytest.raises(ParameterError):
            KernelOperator(self.model, self.phi, 0.0)

    def test_rejects_undefined_multiplier(self):
        with pytest.raises(SpectralDomainError):
            KernelOperator(self.model, power_multiplier(-1), 1.0)

    def test_compose_multiplies_symbols(self):
        first = KernelOperator(self.model, self.phi, 0.05, label="a")
        second = heat_operator(self.model, 0.001)
        product = first.compose(second)
        np.testing.assert_allclose(product.multipliers, first.multipliers * second.multipliers)
        assert product.at_zero == pytest.approx(1.0)

    def test_apply_values_matches_coefficients(self):
        op = heat_operator(self.model, 0.01)
        rng = np.random.default_rng(2)
        f = self.model.random_band_limited(60.0, rng)
        np.testing.assert_allclose(op.apply_values(self.model.synthesize(f)),
                                   self.model.synthesize(op.apply(f)), atol=1e-12)


class TestMarkov:
    @pytest.mark.parametrize("kind,N", [(SpaceKind.TORUS, 64), (SpaceKind.JACOBI, 32)])
    def test_cutoff_and_heat_integrate_to_value_at_zero(self, kind, N):
        model = SpectralModel(kind, N, alpha=0.5, beta=1.5)
        phi = make_cutoff(CutoffKind.TYPE_A, b=2.0)
        assert markov_residual(KernelOperator(model, phi, 0.2)) < 1e-10
        assert markov_residual(heat_operator(model, 0.05)) < 1e-10
        assert markov_residual(KernelOperator(model, power_multiplier(2), 0.01)) < 1e-10

    @pytest.mark.parametrize("N", [256, 512])
    def test_legendre_markov_at_large_truncation(self, N):
        model = SpectralModel(SpaceKind.JACOBI, N)
        phi = make_cutoff(CutoffKind.TYPE_A, b=2.0)
        for delta in (0.2, 0.05, 0.02):
            assert markov_residual(KernelOperator(model, phi, delta)) <= 1e-10
        assert markov_residual(heat_operator(model, 0.05)) <= 1e-10


class TestFiniteSpeed:
    def setup_method(self):
        self.model = SpectralModel(SpaceKind.TORUS, 256)

    def test_band_limited_kernel_stays_in_cone(self):
        diagonal = abs(KernelOperator(self.model, band_limited_wave_multiplier(1.0), 0.2).kernel_rows([0])[0, 0])
        residual = finite_speed_residual(self.model, 1.0, 0.2, wave_speed=1.0)
        assert residual / diagonal < 1e-6

    def test_gaussian_leaks(self):
        diagonal = abs(KernelOperator(self.model, gaussian_multiplier, 0.2).kernel_rows([0])[0, 0])
        residual = finite_speed_residual(self.model, 1.0, 0.2, wave_speed=1.0,
                                         multiplier=gaussian_multiplier)
        assert residual / diagonal > 1e-6


class TestLocalization:
    def setup_method(self):
        self.model = SpectralModel(SpaceKind.TORUS, 256)
        self.phi = make_cutoff(CutoffKind.TYPE_A, b=2.0)

    def test_cutoff_kernel_decays(self):
        delta = 8.0 / float(self.model.sqrt_eigenvalues[-1])
        envelope = localization_report(KernelOperator(self.model, self.phi, delta), beta=0.5)
        assert envelope.form == EnvelopeForm.SUBEXPONENTIAL
        assert envelope.kappa > 0
        assert envelope.points >= 5

    def test_fit_needs_points_above_floor(self):
        with pytest.raises(FitError):
            fit_envelope(np.array([3.0, 4.0]), np.array([1.0, 0.5]), 1.0, EnvelopeForm.SUBEXPONENTIAL)

    def test_compose_check(self):
        delta = 8.0 / float(self.model.sqrt_eigenvalues[-1])
        op = KernelOperator(self.model, self.phi, delta, label="Phi")
        report = compose_check(op, op, beta=0.5, triples=2000)
        assert report.inequality_violations == 0
        assert report.triples == 2000
        assert report.c_natural_hat > 0


class TestQuasiMetric:
    @pytest.mark.parametrize("kind", [SpaceKind.TORUS, SpaceKind.JACOBI])
    @pytest.mark.parametrize("beta", [0.3, 0.5, 1.0])
    def test_power_of_distance_is_subadditive(self, kind, beta):
        model = SpectralModel(kind, 32)
        assert subadditivity_violations(model, beta, triples=5000) == 0


class TestInequalities:
    def setup_method(self):
        self.model = SpectralModel(SpaceKind.TORUS, 256)
        self.phi = make_cutoff(CutoffKind.TYPE_A, b=2.0)

    def test_nikolskii_exponent_is_d_over_p(self):
        slope, ratios = nikolskii_exponent(self.model, 2.0, [16, 32, 64, 128], self.phi)
        assert slope == pytest.approx(0.5, abs=0.05)
        assert all(np.diff(ratios) > 0)

    def test_kernel_l1_norm_is_at_least_one(self):
        low, high = kernel_norm_band(self.model, self.phi, 1.0, [0.02, 0.05])
        assert low >= 1 - 1e-9
        assert high < 10

    def test_davies_gaffney_constant_positive(self):
        constants = davies_gaffney_constant(self.model, (0.2, 0.05), (0.6, 0.05), [0.001, 0.01])
        assert set(constants) == {"0.001", "0.01", "c_hat"}
        assert constants["c_hat"] > 0

    def test_davies_gaffney_needs_separated_balls(self):
        with pytest.raises(ParameterError):
            davies_gaffney_constant(self.model, (0.2, 0.2), (0.3, 0.2), [0.01])
