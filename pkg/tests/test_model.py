import math

import numpy as np
import pytest

from twoscale.errors import DimensionMismatch, ZeroWeightSum
from twoscale.model import (
    CosSinTransition,
    CouplingSpec,
    LinearTransition,
    ModelDims,
    NoiseSpec,
    log_trans_coarse,
    log_trans_fine,
    transition_coarse,
    transition_fine,
    validate_model,
    weighted_fine_average,
)
from twoscale.rngstats import mvn_logpdf

COS_SIN = CosSinTransition()


def coupling_for(p=3, d=2, k=4, fine=None, indiv=None, weights=None):
    return CouplingSpec(
        np.zeros((p, p)) if fine is None else fine,
        np.zeros((d, d)) if indiv is None else indiv,
        np.full(k, 1.0 / k) if weights is None else weights,
    )


class TestSpecs:
    def test_dims_must_be_positive(self):
        with pytest.raises(ValueError):
            ModelDims(0, 1, 1, 1, 1)

    def test_zero_weight_sum_rejected(self):
        with pytest.raises(ZeroWeightSum):
            coupling_for(weights=np.zeros(4))

    def test_negative_weights_rejected(self):
        with pytest.raises(ValueError):
            coupling_for(weights=np.array([1.0, -1.0, 1.0, 1.0]))

    def test_validate_model_requires_equal_dims_for_cos_sin(self):
        dims = ModelDims(2, 3, 4, 3, 2)
        with pytest.raises(DimensionMismatch):
            validate_model(dims, coupling_for(), COS_SIN)

    def test_noise_spec_validates_spd(self):
        from twoscale.errors import NotPositiveDefinite

        with pytest.raises(NotPositiveDefinite):
            NoiseSpec(np.zeros((2, 2)), (np.eye(2),), np.eye(2), (np.eye(2),))


class TestTransitionFine:
    def test_zero_argument_gives_ones(self):
        got = transition_fine(np.array([0.3, -0.2, 1.0]), np.zeros(3), coupling_for(), COS_SIN)
        assert np.array_equal(got, np.ones(3))

    def test_cos_of_half_pi_is_zero(self):
        c = coupling_for(fine=np.eye(3))
        got = transition_fine(np.zeros(3), (np.pi / 2) * np.ones(3), c, COS_SIN)
        assert np.allclose(got, 0.0, atol=1e-15)

    def test_scalar_cosine_oracle(self):
        c = coupling_for(fine=np.eye(3))
        got = transition_fine(np.array([0.1, 0.2, 0.3]), np.array([0.4, 0.4, 0.4]), c, COS_SIN)
        expected = [math.cos(0.5), math.cos(0.6), math.cos(0.7)]
        assert np.allclose(got, expected, atol=1e-12)
        assert np.allclose(got, [0.87758, 0.82534, 0.76484], atol=1e-5)

    def test_linear_kind(self):
        f = np.array([[0.5, 0.0, 0.1], [0.0, 0.4, 0.0], [0.2, 0.0, 0.3]])
        kind = LinearTransition(f, np.zeros((2, 2)))
        x = np.array([1.0, -2.0, 0.5])
        c = np.array([0.1, 0.2, 0.3])
        assert np.allclose(transition_fine(x, c, coupling_for(), kind), f @ x + c)

    def test_linear_matches_cos_argument(self):
        # With the fine matrix equal to the coupling matrix, the linear kind
        # reproduces exactly the affine argument inside the cosine.
        rng = np.random.default_rng(3)
        a = rng.uniform(-0.5, 0.5, (3, 3))
        c = coupling_for(fine=a)
        kind = LinearTransition(a, np.zeros((2, 2)))
        x = rng.standard_normal(3)
        off = rng.standard_normal(3)
        linear = transition_fine(x, off, c, kind)
        assert np.allclose(np.cos(linear), transition_fine(x, off, c, COS_SIN), atol=1e-15)

    def test_dimension_mismatch(self):
        with pytest.raises(DimensionMismatch):
            transition_fine(np.zeros(2), np.zeros(3), coupling_for(), COS_SIN)

    def test_range_bound_property(self):
        rng = np.random.default_rng(44)
        for _ in range(100):
            p = int(rng.integers(1, 5))
            c = coupling_for(fine=rng.uniform(-2, 2, (p, p)))
            got = transition_fine(
                rng.standard_normal(p) * 5, rng.standard_normal(p) * 5, c, COS_SIN
            )
            assert np.all(np.abs(got) <= 1.0)


class TestTransitionCoarse:
    def test_zero_everything_gives_zero(self):
        c = coupling_for(p=3, d=2, k=4)
        got = transition_coarse(np.zeros((2, 3)), np.zeros((4, 3)), c, 0, COS_SIN)
        assert np.array_equal(got, np.zeros(3))

    def test_constant_fine_trajectory(self):
        c = coupling_for(p=3, d=2, k=4)
        traj = 0.7 * np.ones((4, 3))
        got = transition_coarse(np.ones((2, 3)), traj, c, 1, COS_SIN)
        assert np.allclose(got, np.sin(0.7) * np.ones(3), atol=1e-15)

    def test_hand_expanded_two_individuals(self):
        b = np.array([[0.0, 1.0], [1.0, 0.0]])
        c = coupling_for(p=3, d=2, k=2, indiv=b)
        rows = np.array([[0.1, 0.2, 0.3], [-0.5, 0.4, 0.0]])
        traj = np.array([[0.2, 0.2, 0.2], [0.4, 0.4, 0.4]])
        avg = np.array([0.3, 0.3, 0.3])
        got = transition_coarse(rows, traj, c, 0, COS_SIN)
        assert np.allclose(got, np.sin(rows[1] + avg), atol=1e-15)

    def test_weight_rescaling_invariance(self):
        rng = np.random.default_rng(21)
        for _ in range(100):
            k = int(rng.integers(1, 6))
            w = rng.uniform(0.05, 2.0, k)
            scale = float(rng.uniform(0.1, 50.0))
            base = coupling_for(p=3, d=2, k=k, indiv=rng.uniform(-1, 1, (2, 2)), weights=w)
            scaled = coupling_for(
                p=3, d=2, k=k, indiv=base.individual_coupling, weights=scale * w
            )
            rows = rng.standard_normal((2, 3))
            traj = rng.standard_normal((k, 3))
            a = transition_coarse(rows, traj, base, 1, COS_SIN)
            b = transition_coarse(rows, traj, scaled, 1, COS_SIN)
            assert np.allclose(a, b, atol=1e-12)

    def test_range_bound_property(self):
        rng = np.random.default_rng(45)
        for _ in range(100):
            d = int(rng.integers(1, 5))
            k = int(rng.integers(1, 5))
            c = coupling_for(p=2, d=d, k=k, indiv=rng.uniform(-2, 2, (d, d)))
            got = transition_coarse(
                rng.standard_normal((d, 2)) * 4,
                rng.standard_normal((k, 2)) * 4,
                c,
                int(rng.integers(0, d)),
                COS_SIN,
            )
            assert np.all(np.abs(got) <= 1.0)

    def test_linear_kind_replaces_individual_matrix(self):
        b = np.array([[0.2, 0.1], [0.0, 0.5]])
        kind = LinearTransition(np.eye(3), b)
        c = coupling_for(p=3, d=2, k=2)
        rows = np.array([[1.0, 0.0, 0.0], [0.0, 1.0, 0.0]])
        traj = np.zeros((2, 3))
        got = transition_coarse(rows, traj, c, 0, kind)
        assert np.allclose(got, b[0] @ rows)

    def test_dimension_checks(self):
        c = coupling_for(p=3, d=2, k=4)
        with pytest.raises(DimensionMismatch):
            transition_coarse(np.zeros((2, 3)), np.zeros((4, 2)), c, 0, COS_SIN)
        with pytest.raises(DimensionMismatch):
            transition_coarse(np.zeros((3, 3)), np.zeros((4, 3)), c, 0, COS_SIN)

    def test_weighted_average_shape_check(self):
        with pytest.raises(DimensionMismatch):
            weighted_fine_average(np.zeros((3, 2)), coupling_for(p=2, d=2, k=4))


class TestLogDensities:
    def test_fine_mode_value(self):
        c = coupling_for(fine=np.eye(3))
        sigma2 = 0.2
        x_prev = np.array([0.1, 0.2, 0.3])
        coarse = np.array([0.4, 0.4, 0.4])
        mode = transition_fine(x_prev, coarse, c, COS_SIN)
        got = log_trans_fine(mode, x_prev, coarse, sigma2 * np.eye(3), c, COS_SIN)
        assert got == pytest.approx(-(3 / 2) * np.log(2 * np.pi * sigma2), abs=1e-12)

    def test_fine_quadratic_decay(self):
        c = coupling_for(fine=np.eye(3))
        sigma2 = 0.4
        x_prev = np.zeros(3)
        coarse = np.zeros(3)
        mode = transition_fine(x_prev, coarse, c, COS_SIN)
        at_mode = log_trans_fine(mode, x_prev, coarse, sigma2 * np.eye(3), c, COS_SIN)
        delta = 0.37
        shifted = mode + np.array([delta, 0.0, 0.0])
        got = log_trans_fine(shifted, x_prev, coarse, sigma2 * np.eye(3), c, COS_SIN)
        assert at_mode - got == pytest.approx(delta**2 / (2 * sigma2), abs=1e-12)

    def test_fine_compositional(self):
        rng = np.random.default_rng(9)
        c = coupling_for(fine=rng.uniform(-0.5, 0.5, (3, 3)))
        cov = np.diag(rng.uniform(0.1, 1.0, 3))
        x_next, x_prev, coarse = rng.standard_normal((3, 3))
        expected = mvn_logpdf(x_next, transition_fine(x_prev, coarse, c, COS_SIN), cov)
        got = log_trans_fine(x_next, x_prev, coarse, cov, c, COS_SIN)
        assert got == pytest.approx(expected, abs=1e-12)

    def test_coarse_mode_value(self):
        c = coupling_for(p=3, d=2, k=4)
        sigma2 = 0.5
        rows = np.zeros((2, 3))
        traj = np.zeros((4, 3))
        mode = transition_coarse(rows, traj, c, 0, COS_SIN)
        got = log_trans_coarse(mode, rows, traj, sigma2 * np.eye(3), c, 0, COS_SIN)
        assert got == pytest.approx(-(3 / 2) * np.log(2 * np.pi * sigma2), abs=1e-12)

    def test_coarse_symmetric_deviation(self):
        rng = np.random.default_rng(13)
        c = coupling_for(p=3, d=2, k=4, indiv=rng.uniform(-1, 1, (2, 2)))
        rows = rng.standard_normal((2, 3))
        traj = rng.standard_normal((4, 3))
        cov = 0.3 * np.eye(3)
        mode = transition_coarse(rows, traj, c, 1, COS_SIN)
        delta = np.array([0.2, -0.1, 0.05])
        up = log_trans_coarse(mode + delta, rows, traj, cov, c, 1, COS_SIN)
        down = log_trans_coarse(mode - delta, rows, traj, cov, c, 1, COS_SIN)
        assert up == pytest.approx(down, abs=1e-12)

    def test_coarse_compositional(self):
        rng = np.random.default_rng(14)
        c = coupling_for(p=3, d=2, k=4, indiv=rng.uniform(-1, 1, (2, 2)))
        rows = rng.standard_normal((2, 3))
        traj = rng.standard_normal((4, 3))
        cov = np.diag(rng.uniform(0.2, 0.8, 3))
        target = rng.standard_normal(3)
        expected = mvn_logpdf(target, transition_coarse(rows, traj, c, 1, COS_SIN), cov)
        got = log_trans_coarse(target, rows, traj, cov, c, 1, COS_SIN)
        assert got == pytest.approx(expected, abs=1e-12)

    def test_mode_dominates(self):
        rng = np.random.default_rng(15)
        c = coupling_for(fine=rng.uniform(-0.5, 0.5, (3, 3)))
        cov = 0.2 * np.eye(3)
        x_prev, coarse = rng.standard_normal((2, 3))
        mode = transition_fine(x_prev, coarse, c, COS_SIN)
        at_mode = log_trans_fine(mode, x_prev, coarse, cov, c, COS_SIN)
        for _ in range(50):
            other = mode + rng.standard_normal(3)
            assert log_trans_fine(other, x_prev, coarse, cov, c, COS_SIN) <= at_mode
