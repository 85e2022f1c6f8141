import numpy as np
import pytest

from twoscale.errors import AllWeightsZero, DimensionMismatch, NotPositiveDefinite
from twoscale.rngstats import (
    CholCov,
    IwParams,
    categorical_sample,
    categorical_sample_log,
    cholesky,
    inv_wishart_sample,
    mvn_logpdf,
    mvn_sample,
    normalize_log_weights,
    resample_indices,
    substream,
)


def seeded_spd(rng, dim):
    m = rng.standard_normal((dim, dim))
    return m.T @ m + np.eye(dim)


class TestSubstream:
    def test_same_key_same_stream(self):
        a = substream(42, 1, 2, 3).standard_normal(5)
        b = substream(42, 1, 2, 3).standard_normal(5)
        assert np.array_equal(a, b)

    def test_different_keys_differ(self):
        a = substream(42, 1, 2, 3).standard_normal(5)
        b = substream(42, 1, 2, 4).standard_normal(5)
        assert not np.array_equal(a, b)

    def test_independent_of_call_order(self):
        first = substream(9, 0).standard_normal(3)
        _ = substream(9, 1).standard_normal(100)
        again = substream(9, 0).standard_normal(3)
        assert np.array_equal(first, again)


class TestCholesky:
    def test_identity(self):
        assert np.array_equal(cholesky(np.eye(3)), np.eye(3))

    def test_diagonal_square_roots(self):
        got = cholesky(np.array([[4.0, 0.0], [0.0, 9.0]]))
        assert np.allclose(got, np.diag([2.0, 3.0]))

    def test_reconstruction(self):
        rng = np.random.default_rng(11)
        for _ in range(20):
            a = seeded_spd(rng, 3)
            low = cholesky(a)
            err = np.linalg.norm(low @ low.T - a) / np.linalg.norm(a)
            assert err < 1e-9
            assert np.allclose(np.triu(low, 1), 0.0)

    def test_zero_matrix_rejected(self):
        with pytest.raises(NotPositiveDefinite):
            cholesky(np.zeros((2, 2)))

    def test_indefinite_rejected(self):
        with pytest.raises(NotPositiveDefinite):
            cholesky(np.array([[1.0, 2.0], [2.0, 1.0]]))

    def test_asymmetric_rejected(self):
        with pytest.raises(NotPositiveDefinite):
            cholesky(np.array([[1.0, 0.5], [0.0, 1.0]]))

    def test_nonsquare_rejected(self):
        with pytest.raises(DimensionMismatch):
            cholesky(np.ones((2, 3)))


class TestMvnSample:
    def test_zero_cov_rejected(self):
        with pytest.raises(NotPositiveDefinite):
            mvn_sample(np.zeros(2), np.zeros((2, 2)), substream(0))

    def test_mean_law_of_large_numbers(self):
        rng = substream(123)
        draws = np.array([mvn_sample([5.0, 5.0], np.eye(2), rng) for _ in range(10_000)])
        assert np.all(np.abs(draws.mean(axis=0) - 5.0) < 0.05)

    def test_sample_covariance(self):
        rng = substream(321)
        cov = np.diag([0.2, 0.2, 0.2])
        draws = np.array([mvn_sample(np.zeros(3), cov, rng) for _ in range(10_000)])
        sample_cov = np.cov(draws, rowvar=False)
        assert np.all(np.abs(np.diag(sample_cov) - 0.2) / 0.2 < 0.10)

    def test_deterministic_under_seed(self):
        a = mvn_sample(np.zeros(3), np.eye(3), substream(5, 1))
        b = mvn_sample(np.zeros(3), np.eye(3), substream(5, 1))
        assert np.array_equal(a, b)

    def test_dimension_mismatch(self):
        with pytest.raises(DimensionMismatch):
            mvn_sample(np.zeros(2), np.eye(3), substream(0))


class TestMvnLogpdf:
    def test_standard_normal_at_zero(self):
        assert mvn_logpdf([0.0], [0.0], np.eye(1)) == pytest.approx(-0.9189385332046727, abs=1e-12)

    def test_mode_value(self):
        sigma2 = 0.3
        p = 4
        got = mvn_logpdf(np.ones(p), np.ones(p), sigma2 * np.eye(p))
        assert got == pytest.approx(-(p / 2) * np.log(2 * np.pi * sigma2), abs=1e-12)

    def test_against_dense_inverse(self):
        rng = np.random.default_rng(77)
        for _ in range(10):
            cov = seeded_spd(rng, 3)
            x = rng.standard_normal(3)
            mean = rng.standard_normal(3)
            diff = x - mean
            expected = -0.5 * (
                diff @ np.linalg.inv(cov) @ diff
                + np.log(np.linalg.det(cov))
                + 3 * np.log(2 * np.pi)
            )
            assert mvn_logpdf(x, mean, cov) == pytest.approx(expected, abs=1e-9)

    def test_integrates_to_one_1d(self):
        sigma = 1.7
        xs = np.linspace(-8 * sigma, 8 * sigma, 20_001)
        dens = np.exp([mvn_logpdf([x], [0.0], sigma**2 * np.eye(1)) for x in xs])
        assert np.trapezoid(dens, xs) == pytest.approx(1.0, abs=1e-6)

    def test_batched_matches_single(self):
        rng = np.random.default_rng(4)
        cov = seeded_spd(rng, 3)
        factor = CholCov(cov)
        xs = rng.standard_normal((6, 3))
        means = rng.standard_normal((6, 3))
        batched = factor.logpdf_many(xs, means)
        for i in range(6):
            assert batched[i] == pytest.approx(mvn_logpdf(xs[i], means[i], cov), abs=1e-12)


class TestInvWishart:
    def test_moment_matches_closed_form(self):
        params = IwParams(0.1 * np.eye(3), 10.0)
        rng = substream(2)
        draws = np.zeros((3, 3))
        n = 50_000
        for _ in range(n):
            draws += inv_wishart_sample(params, rng)
        mean = draws / n
        expected = params.scale / (10.0 - 3 - 1)
        assert np.all(np.abs(np.diag(mean) - np.diag(expected)) / np.diag(expected) < 0.05)

    def test_minimum_proper_dof_stays_spd(self):
        params = IwParams(np.eye(3), 2.5)
        rng = substream(8)
        for _ in range(1000):
            cholesky(inv_wishart_sample(params, rng))

    def test_deterministic_under_seed(self):
        params = IwParams(0.3 * np.eye(2), 5.0)
        a = inv_wishart_sample(params, substream(3, 1))
        b = inv_wishart_sample(params, substream(3, 1))
        assert np.array_equal(a, b)

    def test_improper_dof_rejected(self):
        with pytest.raises(ValueError):
            IwParams(np.eye(3), 2.0)

    def test_degenerate_scale_rejected(self):
        with pytest.raises(NotPositiveDefinite):
            IwParams(np.zeros((3, 3)), 5.0)

    def test_mean_helper(self):
        params = IwParams(0.6 * np.eye(2), 7.0)
        assert np.allclose(params.mean(), 0.6 / 4 * np.eye(2))


class TestCategorical:
    def test_point_mass(self):
        rng = substream(1)
        for _ in range(50):
            assert categorical_sample([0.0, 0.0, 1.0], rng) == 2

    def test_fair_coin_frequency(self):
        rng = substream(6)
        hits = sum(categorical_sample([1.0, 1.0], rng) == 0 for _ in range(100_000))
        assert abs(hits / 100_000 - 0.5) < 0.01

    def test_all_zero_rejected(self):
        with pytest.raises(AllWeightsZero):
            categorical_sample([0.0, 0.0], substream(0))

    def test_negative_rejected(self):
        with pytest.raises(ValueError):
            categorical_sample([0.5, -0.1], substream(0))

    def test_log_variant_matches_distribution(self):
        rng = substream(12)
        logw = np.log([0.2, 0.3, 0.5])
        counts = np.zeros(3)
        n = 60_000
        for _ in range(n):
            counts[categorical_sample_log(logw, rng)] += 1
        assert np.all(np.abs(counts / n - [0.2, 0.3, 0.5]) < 0.01)


class TestWeights:
    def test_normalize_simplex(self):
        rng = np.random.default_rng(10)
        for _ in range(100):
            lw = rng.uniform(-2000, 10, size=rng.integers(1, 30))
            w = normalize_log_weights(lw)
            assert np.all(w >= 0)
            assert abs(w.sum() - 1.0) < 1e-12

    def test_normalize_handles_neg_inf_entries(self):
        w = normalize_log_weights([-np.inf, 0.0])
        assert np.allclose(w, [0.0, 1.0])

    def test_all_neg_inf_rejected(self):
        with pytest.raises(AllWeightsZero):
            normalize_log_weights([-np.inf, -np.inf])

    def test_empty_rejected(self):
        with pytest.raises(AllWeightsZero):
            normalize_log_weights([])


class TestResampleIndices:
    @pytest.mark.parametrize("scheme", ["multinomial", "systematic"])
    def test_indices_valid_and_weighted(self, scheme):
        rng = substream(15)
        w = np.array([0.1, 0.0, 0.6, 0.3])
        idx = resample_indices(w, 20_000, rng, scheme)
        assert idx.min() >= 0 and idx.max() < 4
        assert not np.any(idx == 1)
        freq = np.bincount(idx, minlength=4) / idx.size
        assert np.all(np.abs(freq - w) < 0.02)

    def test_zero_size(self):
        assert resample_indices([1.0], 0, substream(0)).size == 0

    def test_all_zero_rejected(self):
        with pytest.raises(AllWeightsZero):
            resample_indices([0.0, 0.0], 3, substream(0))

    def test_unknown_scheme_rejected(self):
        with pytest.raises(ValueError):
            resample_indices([1.0], 1, substream(0), scheme="stratified")
