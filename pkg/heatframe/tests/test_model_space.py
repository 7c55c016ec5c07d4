import numpy as np
import pytest
from pydantic import ValidationError
from scipy import integrate

from ..services.model_space_service import SpectralModel, build_model
from ..models.errors import ConfigurationError, SpectralIndexError
from ..models.spectral_data import SpaceDescriptor, SpaceKind
from ..utils.numerics import gauss_jacobi, jacobi_mass, jacobi_orthonormal


class TestTorusModel:
    def setup_method(self):
        self.model = SpectralModel(SpaceKind.TORUS, 64)

    def test_eigenvalues_follow_frequency_pairs(self):
        expected = (2 * np.pi * np.array([0, 1, 1, 2, 2, 3, 3])) ** 2
        np.testing.assert_allclose(self.model.eigenvalues[:7], expected)

    def test_default_resolution_is_power_of_two(self):
        assert self.model.resolution == 256
        assert SpectralModel(SpaceKind.TORUS, 512).resolution == 2048

    def test_basis_is_orthonormal_on_grid(self):
        assert self.model.orthonormality_error() < 1e-12

    def test_eigenpair_out_of_range(self):
        with pytest.raises(SpectralIndexError):
            self.model.eigenpair(65)
        with pytest.raises(IndexError):
            self.model.eigenpair(-1)

    def test_eigenpair_values(self):
        lam, e = self.model.eigenpair(1)
        assert lam == pytest.approx(4 * np.pi ** 2)
        np.testing.assert_allclose(e(np.array([0.0, 0.25])), [np.sqrt(2), 0.0], atol=1e-14)

    def test_quadrature_below_nyquist_rejected(self):
        with pytest.raises(ConfigurationError):
            self.model.quadrature(100)

    @pytest.mark.parametrize("r,expected", [(0.1, 0.2), (0.3, 0.6), (0.7, 1.0)])
    def test_ball_measure(self, r, expected):
        assert float(self.model.ball_measure(0.4, r)) == pytest.approx(expected)

    def test_distance_wraps(self):
        assert float(self.model.distance(0.05, 0.95)) == pytest.approx(0.1)

    def test_node_distances_are_integer_exact(self):
        distances = self.model.node_distances(3)
        assert distances[3] == 0.0
        assert distances[3 + 64] == 64 / 256
        assert distances[(3 - 64) % 256] == distances[3 + 64]

    def test_doubling_dimension_is_one(self):
        report = self.model.doubling_report(samples=500, seed=1)
        assert report.d_hat == pytest.approx(1.0)
        assert report.reverse_c_hat == pytest.approx(2.0)
        assert self.model.dim_d == pytest.approx(1.0)

    def test_random_band_limited(self):
        rng = np.random.default_rng(3)
        f = self.model.random_band_limited(2 * np.pi * 4, rng)
        assert np.linalg.norm(f) == pytest.approx(1.0)
        assert np.all(f[9:] == 0)
        assert np.any(f[:9] != 0)

    def test_synthesize_matches_analysis(self):
        rng = np.random.default_rng(0)
        f = self.model.random_band_limited(100.0, rng)
        np.testing.assert_allclose(self.model.analyze(self.model.synthesize(f)), f, atol=1e-12)

    def test_product_band_doubles(self):
        assert self.model.product_band(2 * np.pi * 3) == pytest.approx(2 * 2 * np.pi * 3)
        assert self.model.polynomial_constant == 2.0

    def test_grid_norm_of_constant(self):
        assert self.model.grid_norm(np.ones(256), 3) == pytest.approx(1.0)
        assert self.model.grid_norm(np.ones(256), np.inf) == 1.0


class TestJacobiModel:
    def setup_method(self):
        self.model = SpectralModel(SpaceKind.JACOBI, 32, alpha=0.5, beta=-0.5)

    def test_eigenvalue_law(self):
        k = np.arange(33)
        np.testing.assert_allclose(self.model.eigenvalues, k * (k + 1.0))

    def test_basis_is_orthonormal_on_grid(self):
        assert self.model.orthonormality_error() < 1e-11

    def test_measure_matches_closed_form(self):
        assert self.model.measure == pytest.approx(jacobi_mass(0.5, -0.5))
        assert jacobi_mass(0, 0) == pytest.approx(2.0)

    @pytest.mark.parametrize("x,r", [(0.3, 0.2), (0.99, 0.5), (-0.7, 1.1), (1.0, 0.05)])
    def test_ball_measure_against_quad(self, x, r):
        theta = np.arccos(x)
        lo, hi = np.cos(min(theta + r, np.pi)), np.cos(max(theta - r, 0.0))
        expected, _ = integrate.quad(lambda y: (1 - y) ** 0.5 * (1 + y) ** -0.5, lo, hi)
        assert float(self.model.ball_measure(x, r)) == pytest.approx(expected, rel=1e-6)

    def test_full_ball_is_total_mass(self):
        assert float(self.model.ball_measure(0.0, np.pi)) == pytest.approx(self.model.measure)

    def test_polynomial_constant_covers_products(self):
        a = self.model.polynomial_constant
        for k in (2, 5, 10):
            lam = np.sqrt(k * (k + 1.0))
            assert self.model.product_band(lam) <= a * lam + 1e-9

    def test_doubling_dimension_near_two_for_legendre(self):
        model = SpectralModel(SpaceKind.JACOBI, 16)
        report = model.doubling_report(samples=2000, seed=0)
        assert 1.5 < report.d_hat <= 2.2
        assert report.comparison_max < np.inf

    def test_bad_parameters(self):
        with pytest.raises(ConfigurationError):
            SpectralModel(SpaceKind.JACOBI, 8, alpha=-1.0)


class TestDescriptors:
    def test_build_model_from_descriptor(self):
        model = build_model(SpaceDescriptor(kind="jacobi", alpha=1.0, beta=0.0, N=16))
        assert model.label == "jacobi(1,0)"
        assert model.descriptor.N == 16

    def test_descriptor_validation(self):
        with pytest.raises(ValidationError):
            SpaceDescriptor(N=0)
        with pytest.raises(ValidationError):
            SpaceDescriptor(kind="jacobi", alpha=-2)

    def test_gauss_jacobi_nodes_ascending(self):
        nodes, weights = gauss_jacobi(10, 0.0, 0.0)
        assert np.all(np.diff(nodes) > 0)
        assert weights.sum() == pytest.approx(2.0)


class TestGaussJacobi:
    @pytest.mark.parametrize("alpha,beta", [(0.0, 0.0), (0.5, -0.5), (1.5, 0.0)])
    def test_rule_integrates_polynomials(self, alpha, beta):
        nodes, weights = gauss_jacobi(40, alpha, beta)
        assert weights.sum() == pytest.approx(jacobi_mass(alpha, beta), rel=1e-14)
        assert np.all(weights > 0)
        expected, _ = integrate.quad(lambda y: y ** 6 * (1 - y) ** alpha * (1 + y) ** beta, -1, 1)
        assert np.dot(weights, nodes ** 6) == pytest.approx(expected, rel=1e-10)

    def test_large_truncation_stays_orthonormal(self):
        model = SpectralModel(SpaceKind.JACOBI, 512)
        assert model.resolution == 1024
        assert model.orthonormality_error() <= 1e-10

    def test_nodes_are_roots_of_top_polynomial(self):
        nodes, _ = gauss_jacobi(300, 0.0, 0.0)
        top = jacobi_orthonormal(nodes, 300, 0.0, 0.0)[:, -1]
        assert np.abs(top).max() < 1e-9
