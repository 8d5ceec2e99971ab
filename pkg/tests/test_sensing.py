import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from rbmcs.sensing import (DimensionError, SensingOperator, build_noise_model,
                           gen_bernoulli_matrix, measure, quantization_noise_variance)


class TestBernoulliMatrix:
    def test_entries_are_plus_minus_half_for_m4(self):
        op = gen_bernoulli_matrix(4, 8, seed=3)
        assert op.phi.shape == (4, 8)
        assert set(np.unique(op.phi)) <= {0.5, -0.5}

    def test_deterministic_given_seed(self):
        a = gen_bernoulli_matrix(64, 128, seed=11)
        b = gen_bernoulli_matrix(64, 128, seed=11)
        assert np.array_equal(a.phi, b.phi)
        assert not np.array_equal(a.phi, gen_bernoulli_matrix(64, 128, seed=12).phi)

    def test_sample_mean_near_zero(self):
        op = gen_bernoulli_matrix(64, 128, seed=5)
        # entries have std 1/sqrt(64); the mean of 64*128 of them has std
        # (1/8)/sqrt(8192), so a 4-sigma bound is 0.0055
        bound = 4 * (1 / np.sqrt(64)) / np.sqrt(64 * 128)
        assert abs(op.phi.mean()) <= bound

    @pytest.mark.parametrize("m, n", [(0, 8), (9, 8)])
    def test_invalid_dimensions(self, m, n):
        with pytest.raises(DimensionError):
            gen_bernoulli_matrix(m, n, seed=0)

    @settings(max_examples=30, deadline=None)
    @given(m=st.integers(1, 40), extra=st.integers(0, 40), seed=st.integers(0, 2 ** 31))
    def test_unit_columns_and_magnitudes(self, m, extra, seed):
        op = gen_bernoulli_matrix(m, m + extra, seed=seed)
        np.testing.assert_allclose(np.abs(op.phi), 1 / np.sqrt(m), rtol=0, atol=1e-15)
        np.testing.assert_allclose(np.linalg.norm(op.phi, axis=0), 1.0, atol=1e-12)


class TestMeasure:
    def test_zero_signal(self):
        op = gen_bernoulli_matrix(5, 10, seed=0)
        assert np.array_equal(measure(op, np.zeros(10), 0.0), np.zeros(5))

    def test_basis_vector_picks_column(self):
        op = gen_bernoulli_matrix(5, 10, seed=0)
        e1 = np.zeros(10)
        e1[0] = 1.0
        assert np.array_equal(measure(op, e1, 0.0), op.phi[:, 0])

    def test_noise_reproducible(self, rng):
        op = gen_bernoulli_matrix(6, 12, seed=1)
        x = rng.standard_normal(12)
        a = measure(op, x, 0.25, seed=9)
        assert np.array_equal(a, measure(op, x, 0.25, seed=9))
        assert not np.array_equal(a, op.phi @ x)

    def test_noise_variance(self):
        op = gen_bernoulli_matrix(200, 200, seed=2)
        x = np.zeros(200)
        samples = np.concatenate([measure(op, x, 0.25, seed=s) for s in range(50)])
        assert abs(samples.var() - 0.25) < 0.01

    def test_linear_when_noiseless(self, rng):
        op = gen_bernoulli_matrix(7, 13, seed=4)
        x1, x2 = rng.standard_normal((2, 13))
        np.testing.assert_allclose(measure(op, x1 + x2, 0.0),
                                   measure(op, x1, 0.0) + measure(op, x2, 0.0), atol=1e-12)

    def test_length_mismatch(self):
        op = gen_bernoulli_matrix(3, 6, seed=0)
        with pytest.raises(DimensionError):
            measure(op, np.zeros(5), 0.0)


class TestNoiseModel:
    def test_identity_when_only_sampling_noise(self):
        op = gen_bernoulli_matrix(6, 10, seed=0)
        nm = build_noise_model(op, np.zeros(10), 1.0)
        # the 1e-8 variance floor contributes 1e-8 * Phi Phi^T
        np.testing.assert_allclose(nm.sigma_eta, np.eye(6), atol=1e-7)

    def test_scaled_identity_factor(self):
        op = gen_bernoulli_matrix(6, 10, seed=0)
        nm = build_noise_model(op, np.zeros(10), 4.0)
        np.testing.assert_allclose(nm.sigma_eta, 4 * np.eye(6), atol=1e-7)
        np.testing.assert_allclose(nm.sigma_eta_factor, 2 * np.eye(6), atol=1e-7)

    def test_hand_computed_2x2(self):
        phi = np.array([[1.0, 1.0], [1.0, -1.0]]) / np.sqrt(2)
        op = SensingOperator(phi=phi, m_rows=2, n_cols=2, seed=None)
        nm = build_noise_model(op, [1.0, 3.0], 0.5, floor=0.0)
        # 1/2 [[a+b, a-b], [a-b, a+b]] + 0.5 I with a=1, b=3
        expected = np.array([[2.5, -1.0], [-1.0, 2.5]])
        np.testing.assert_allclose(nm.sigma_eta, expected, atol=1e-14)

    def test_factor_reproduces_covariance(self, rng):
        op = gen_bernoulli_matrix(20, 40, seed=8)
        nm = build_noise_model(op, rng.random(40), 0.1)
        L = nm.sigma_eta_factor
        assert np.allclose(L, np.tril(L))
        rel = np.linalg.norm(L @ L.T - nm.sigma_eta) / np.linalg.norm(nm.sigma_eta)
        assert rel <= 1e-10

    def test_floor_makes_pd_without_sampling_noise(self):
        op = gen_bernoulli_matrix(3, 8, seed=0)
        nm = build_noise_model(op, np.r_[np.ones(4), np.zeros(4)], 0.0)
        assert np.all(np.linalg.eigvalsh(nm.sigma_eta) > 0)

    def test_both_zero_rejected(self):
        op = gen_bernoulli_matrix(3, 8, seed=0)
        with pytest.raises(ValueError):
            build_noise_model(op, np.zeros(8), 0.0)

    def test_negative_rejected(self):
        op = gen_bernoulli_matrix(3, 8, seed=0)
        with pytest.raises(ValueError):
            build_noise_model(op, -np.ones(8), 1.0)


class TestQuantizationNoise:
    def test_low_end(self):
        assert quantization_noise_variance(37.5, 10) == pytest.approx(1.1176e-4, rel=1e-3)

    def test_high_end(self):
        assert quantization_noise_variance(8600, 10) == pytest.approx(5.877, rel=1e-3)

    def test_zero_range(self):
        assert quantization_noise_variance(0.0, 10) == 0.0

    def test_formula(self):
        assert quantization_noise_variance(3.0, 1) == pytest.approx(9 / 48)
