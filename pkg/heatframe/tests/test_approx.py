import logging

import numpy as np
import pytest

from ..services.approximation_service import (bernstein_ratio, btau_norm, curve_slope,
                                              eigenbasis_curve, embedding_constant,
                                              greedy_sigma_curve, jackson_slope,
                                              orthonormal_oracle_curve, prefactor_check,
                                              smoothness_tau, synthetic_besov_function)
from ..services.cutoff_service import make_cutoff
from ..services.frame_service import build_frame
from ..services.model_space_service import SpectralModel
from ..models.errors import ContractError, ParameterError
from ..models.spectral_data import ApproxCurve, CutoffKind, FrameVariant, JacksonStatus, SpaceKind


class TestGreedy:
    @classmethod
    def setup_class(cls):
        cls.model = SpectralModel(SpaceKind.TORUS, 64)
        phi = make_cutoff(CutoffKind.TYPE_A, b=2.0)
        cls.frame = build_frame(cls.model, phi, 2.0, 3, FrameVariant.TIGHT)
        cls.f = cls.frame.random_function(np.random.default_rng(11))

    def test_tau(self):
        assert smoothness_tau(1.0, 2.0, 1.0) == pytest.approx(2.0 / 3.0)

    def test_btau_is_homogeneous(self):
        assert btau_norm(np.zeros(self.model.size), self.frame, 1.0, 2.0) == 0.0
        single = btau_norm(self.f, self.frame, 1.0, 2.0)
        assert btau_norm(2 * self.f, self.frame, 1.0, 2.0) == pytest.approx(2 * single)

    def test_btau_needs_finite_p(self):
        with pytest.raises(ParameterError):
            btau_norm(self.f, self.frame, 1.0, np.inf)

    def test_curve_shape(self):
        curve = greedy_sigma_curve(self.f, self.frame, 2.0, 30)
        sigma, best = np.asarray(curve.sigma), np.asarray(curve.sigma_best)
        assert curve.n == list(range(31))
        assert sigma[0] == pytest.approx(self.model.norm(self.f, 2.0))
        np.testing.assert_array_equal(best, np.minimum.accumulate(sigma))
        assert np.all(best <= sigma)

    def test_full_expansion_recovers_function(self):
        curve = greedy_sigma_curve(self.f, self.frame, 2.0, self.frame.size)
        assert curve.sigma[-1] <= 1e-8

    def test_n_max_is_clipped(self, caplog):
        with caplog.at_level(logging.WARNING):
            curve = greedy_sigma_curve(self.f, self.frame, 2.0, self.frame.size + 50)
        assert len(curve.n) == self.frame.size + 1
        assert "clipped" in caplog.text

    def test_frame_without_dual_rejected(self):
        frame1 = build_frame(self.model, self.frame.phi, 2.0, 3, FrameVariant.FRAME1)
        with pytest.raises(ContractError):
            greedy_sigma_curve(self.f, frame1, 2.0, 10)

    def test_synthetic_function_is_band_limited(self):
        f = synthetic_besov_function(self.frame, 1.0, seed=2)
        assert np.linalg.norm(f) > 0
        assert np.all(f[~self.model.band_mask(self.frame.b ** (self.frame.J + 1))] == 0)
        assert np.isfinite(btau_norm(f, self.frame, 1.0, 2.0))

    def test_prefactor_and_embedding(self):
        rng = np.random.default_rng(4)
        family = [self.frame.random_function(rng) for _ in range(3)]
        prefactor = prefactor_check(family, self.frame, 1.0, 2.0, 20)
        assert 0 < prefactor["c_min"] <= prefactor["c_hat"] < np.inf
        assert prefactor["count"] == 3
        assert 0 < embedding_constant(family, self.frame, 1.0, 2.0) < np.inf

    def test_bernstein_rows(self):
        rows = bernstein_ratio(self.frame, 1.0, 2.0, ns=(1, 4), seed=0)
        assert [row["n"] for row in rows] == [1, 4]
        assert all(np.isfinite(row["ratio"]) for row in rows)


class TestOracle:
    def test_eigenbasis_curve_matches_closed_form(self):
        model = SpectralModel(SpaceKind.TORUS, 64)
        theta, count = 1.5, 60
        coefficients = np.zeros(model.size)
        coefficients[:count] = np.arange(1, count + 1) ** -theta
        measured = eigenbasis_curve(model, coefficients, 2.0, 50)
        oracle = orthonormal_oracle_curve(theta, count, 50)
        np.testing.assert_allclose(measured.sigma, oracle.sigma, rtol=1e-8)
        assert oracle.s == pytest.approx(1.0)
        assert oracle.tau == pytest.approx(2.0 / 3.0)

    def test_raw_residuals_decrease_in_orthonormal_basis(self):
        model = SpectralModel(SpaceKind.TORUS, 64)
        coefficients = model.random_band_limited(120.0, np.random.default_rng(6))
        curve = eigenbasis_curve(model, coefficients, 2.0, 60)
        sigma = np.asarray(curve.sigma)
        assert np.all(np.diff(sigma) <= 1e-14)
        np.testing.assert_allclose(curve.sigma_best, sigma, atol=1e-14)

    def test_oracle_needs_square_summable_sequence(self):
        with pytest.raises(ParameterError):
            orthonormal_oracle_curve(0.5, 10, 5)

    def test_oracle_slope(self):
        curve = orthonormal_oracle_curve(1.5, 100000, 1000)
        assert curve_slope(curve, 10, 1000) == pytest.approx(-1.0, abs=0.02)


class TestJackson:
    def test_exact_recovery(self):
        model = SpectralModel(SpaceKind.TORUS, 64)
        coefficients = np.zeros(model.size)
        coefficients[[1, 4, 7]] = [1.0, -0.5, 0.25]
        report = jackson_slope(eigenbasis_curve(model, coefficients, 2.0, 10), 1.0, 1.0)
        assert report.status == JacksonStatus.EXACT
        assert report.passed
        assert report.model_dump(by_alias=True)["pass"] is True

    def test_flat_curve_inconclusive(self):
        curve = ApproxCurve(n=list(range(21)), sigma=[1.0] * 21, s=1.0, p=2.0, tau=2 / 3)
        report = jackson_slope(curve, 1.0, 1.0)
        assert report.status == JacksonStatus.INCONCLUSIVE
        assert not report.passed

    @pytest.mark.parametrize("rate,status", [(0.2, JacksonStatus.FAIL), (2.0, JacksonStatus.PASS)])
    def test_power_law(self, rate, status):
        n = np.arange(1001)
        sigma = np.concatenate([[1.0], n[1:] ** -rate])
        curve = ApproxCurve(n=n.tolist(), sigma=sigma.tolist(), s=1.0, p=2.0, tau=2 / 3)
        report = jackson_slope(curve, 1.0, 1.0)
        assert report.status == status
        assert report.slope_hat == pytest.approx(-rate, abs=1e-9)

    def test_zero_function(self):
        curve = ApproxCurve(n=[0, 1, 2], sigma=[0.0, 0.0, 0.0], s=1.0, p=2.0, tau=2 / 3)
        report = jackson_slope(curve, 1.0, 1.0)
        assert report.status == JacksonStatus.EXACT
        assert report.slope_hat == float("-inf")


class TestFrameJackson:
    @classmethod
    def setup_class(cls):
        cls.model = SpectralModel(SpaceKind.TORUS, 512)
        phi = make_cutoff(CutoffKind.TYPE_A, b=2.0)
        cls.frame = build_frame(cls.model, phi, 2.0, 6, FrameVariant.TIGHT)

    @pytest.mark.parametrize("seed", [0, 1, 2])
    def test_synthetic_function_meets_jackson_rate(self, seed):
        f = synthetic_besov_function(self.frame, 1.0, 2.0, seed=seed)
        curve = greedy_sigma_curve(f, self.frame, 2.0, 400, 1.0)
        report = jackson_slope(curve, 1.0, self.model.dim_d)
        assert report.status in (JacksonStatus.PASS, JacksonStatus.EXACT)
        assert report.slope_hat <= -0.85
