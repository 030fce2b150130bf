"""Least-squares PCE fits, moments and Sobol' indices."""

import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from polyextrema.bench import additive_2d
from polyextrema.errors import ConfigError, UnderdeterminedError, ZeroVarianceError
from polyextrema.orthobasis import Gaussian, Uniform, index_set, sample_inputs, tensor_rule
from polyextrema.pce import (
    SampleSet,
    Surrogate,
    evaluate,
    fit_least_squares,
    fit_quadrature,
    mean,
    sobol_index,
    sobol_indices,
    total_sobol,
    total_sobol_indices,
    variance,
)


def fit(func, families, degree, n, rng):
    X = sample_inputs(families, n, rng)
    return fit_least_squares(families, index_set("total-order", len(families), degree), SampleSet(X, func(X)))


class TestFit:
    def test_affine_coefficients(self):
        fams = [Uniform(-1, 1)]
        X = np.linspace(-1, 1, 10)[:, None]
        s = fit_least_squares(fams, index_set("total-order", 1, 1), SampleSet(X, 2 + X[:, 0]))
        np.testing.assert_allclose(s.coefficients, [2.0, 1 / math.sqrt(3)], atol=1e-12)
        assert mean(s) == pytest.approx(2.0)
        assert variance(s) == pytest.approx(1 / 3)
        assert evaluate(s, [[0.5]])[0] == pytest.approx(2.5)

    def test_zero_target(self, rng):
        s = fit(lambda X: np.zeros(len(X)), [Uniform(-1, 1)] * 2, 3, 30, rng)
        np.testing.assert_allclose(s.coefficients, 0.0, atol=1e-14)
        assert variance(s) == 0.0

    def test_underdetermined(self, rng):
        iset = index_set("total-order", 2, 3)
        X = sample_inputs([Uniform(-1, 1)] * 2, len(iset) - 1, rng)
        with pytest.raises(UnderdeterminedError, match="underdetermined"):
            fit_least_squares([Uniform(-1, 1)] * 2, iset, SampleSet(X, X[:, 0]))

    def test_square_variance(self, rng):
        s = fit(lambda X: X[:, 0] ** 2, [Uniform(-1, 1)], 2, 20, rng)
        assert variance(s) == pytest.approx(4 / 45, abs=1e-12)

    def test_refit_is_idempotent(self, rng):
        fams = [Uniform(0, 1), Gaussian(0, 2)]
        s = fit(lambda X: np.exp(X[:, 0]) * np.sin(X[:, 1]), fams, 4, 80, rng)
        X = sample_inputs(fams, 60, rng)
        again = fit_least_squares(fams, s.index_set, SampleSet(X, evaluate(s, X)))
        np.testing.assert_allclose(again.coefficients, s.coefficients, atol=1e-10)

    def test_variance_matches_quadrature(self, rng):
        fams = [Uniform(0, 1), Gaussian(1, 0.5), Uniform(-2, 3)]
        s = fit(lambda X: X[:, 0] * X[:, 1] ** 2 + np.cos(X[:, 2]), fams, 3, 100, rng)
        rule = tensor_rule(fams, 3)
        g = evaluate(s, rule.points)
        mu = np.dot(g, rule.weights)
        assert np.dot((g - mu) ** 2, rule.weights) == pytest.approx(variance(s), abs=1e-10)

    def test_evaluate_in_chunks(self, rng):
        fams = [Uniform(-1, 1)] * 3
        s = fit(lambda X: X.sum(axis=1) ** 3, fams, 3, 60, rng)
        X = sample_inputs(fams, 1000, rng)
        np.testing.assert_allclose(evaluate(s, X, chunk_size=97), evaluate(s, X, chunk_size=5000))

    def test_serialization_round_trip(self, rng):
        s = fit(lambda X: X[:, 0] * X[:, 1], [Uniform(-1, 1), Gaussian(0, 1)], 2, 20, rng)
        back = Surrogate.from_dict(s.to_dict())
        np.testing.assert_array_equal(back.coefficients, s.coefficients)
        np.testing.assert_array_equal(back.index_set.indices, s.index_set.indices)

    def test_malformed_document(self):
        with pytest.raises(ConfigError):
            Surrogate.from_dict({"families": []})


class TestSobol:
    def test_additive_oracle(self, rng):
        m = additive_2d()
        s = fit(m, m.families, 4, 100, rng)
        assert sobol_index(s, [0]) == pytest.approx(5 / 9, abs=1e-8)
        assert sobol_index(s, [1]) == pytest.approx(4 / 9, abs=1e-8)
        assert sobol_index(s, [0, 1]) == pytest.approx(0.0, abs=1e-8)
        np.testing.assert_allclose(total_sobol_indices(s), [5 / 9, 4 / 9], atol=1e-8)

    def test_pure_interaction(self, rng):
        s = fit(lambda X: X[:, 0] * X[:, 1], [Uniform(-1, 1)] * 2, 2, 20, rng)
        assert sobol_index(s, [0, 1]) == pytest.approx(1.0, abs=1e-12)
        assert sobol_index(s, [0]) == pytest.approx(0.0, abs=1e-12)
        assert total_sobol(s, 0) == pytest.approx(1.0, abs=1e-12)
        assert total_sobol(s, 1) == pytest.approx(1.0, abs=1e-12)

    def test_dominated_total(self, rng):
        s = fit(lambda X: X[:, 0] ** 2 + 100 * X[:, 1], [Uniform(-1, 1)] * 2, 2, 20, rng)
        v1, v2 = 4 / 45, 1e4 / 3
        assert total_sobol(s, 0) == pytest.approx(v1 / (v1 + v2), rel=1e-8)
        assert total_sobol(s, 1) == pytest.approx(v2 / (v1 + v2), rel=1e-10)

    def test_constant_rejected(self, rng):
        s = fit(lambda X: np.full(len(X), 3.0), [Uniform(-1, 1)] * 2, 2, 20, rng)
        with pytest.raises(ZeroVarianceError):
            sobol_index(s, [0])

    def test_bad_subset(self, rng):
        s = fit(lambda X: X[:, 0], [Uniform(-1, 1)] * 2, 1, 10, rng)
        with pytest.raises(ConfigError):
            sobol_index(s, [2])

    @settings(max_examples=30, deadline=None)
    @given(seed=st.integers(0, 2**32 - 1), d=st.integers(1, 4), p=st.integers(1, 4))
    def test_indices_sum_to_one(self, seed, d, p):
        r = np.random.default_rng(seed)
        iset = index_set("total-order", d, p)
        s = Surrogate([Uniform(-1, 1)] * d, iset, r.standard_normal(len(iset)))
        vals = sobol_indices(s)
        assert min(vals.values()) >= -1e-10
        assert sum(vals.values()) == pytest.approx(1.0, abs=1e-10)

    def test_quadrature_projection_is_exact_for_polynomials(self):
        m = additive_2d()
        s = fit_quadrature(m, m.families, index_set("total-order", 2, 4), tensor_rule(m.families, 4))
        assert sobol_index(s, [0]) == pytest.approx(5 / 9, abs=1e-12)
        assert variance(s) == pytest.approx(4 / 45 + 16 / 225, abs=1e-12)
