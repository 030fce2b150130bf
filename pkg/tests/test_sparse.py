"""Least angle regression, leave-one-out errors and adaptive sparse fits."""

import warnings

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from sklearn.linear_model import lars_path

from polyextrema.orthobasis import Uniform, design_matrix, gauss_rule, index_set, sample_inputs, tensor_rule
from polyextrema.pce import SampleSet, evaluate
from polyextrema.sparse import adaptive_lars_fit, lars_select, loo_error


def explicit_loo(A, y):
    errs = []
    for i in range(len(y)):
        mask = np.arange(len(y)) != i
        c = np.linalg.lstsq(A[mask], y[mask], rcond=None)[0]
        errs.append((y[i] - A[i] @ c) ** 2)
    return float(np.mean(errs))


class TestLarsPath:
    def test_single_correlated_predictor_enters_first(self, rng):
        X = rng.standard_normal((40, 5))
        path = lars_select(X, 4.0 * X[:, 2])
        assert path.entered[0] == 2

    def test_two_orthonormal_terms(self):
        fams = [Uniform(-1, 1)] * 2
        rule = tensor_rule(fams, 4)
        iset = index_set("total-order", 2, 3)
        A = design_matrix(fams, iset, rule.points) * np.sqrt(rule.weights)[:, None]
        y = 3.0 * A[:, 4] + 1.0 * A[:, 7]
        path = lars_select(A[:, 1:], y, fit_intercept=False)
        assert path.entered[:2] == [3, 6]
        np.testing.assert_allclose(path.coefficients[2][[3, 6]], [3.0, 1.0], atol=1e-10)

    def test_one_sample(self):
        path = lars_select(np.array([[1.0, 2.0]]), np.array([3.0]))
        assert len(path) == 1
        assert path.entered == []

    def test_at_most_min_columns_samples(self, rng):
        X = rng.standard_normal((8, 30))
        path = lars_select(X, rng.standard_normal(8))
        assert len(path.entered) <= min(30, 8 - 1)

    def test_collinear_column_skipped(self, rng):
        X = rng.standard_normal((30, 4))
        X = np.column_stack([X, 2.0 * X[:, 0]])
        y = X[:, 0] + 0.5 * X[:, 1] + 0.1 * rng.standard_normal(30)
        with pytest.warns(RuntimeWarning, match="collinear"):
            path = lars_select(X, y)
        assert 4 in path.skipped and 4 not in path.entered

    @settings(max_examples=20, deadline=None)
    @given(seed=st.integers(0, 2**32 - 1), p=st.integers(2, 12), extra=st.integers(5, 20))
    def test_matches_reference_implementation(self, seed, p, extra):
        # well-posed shapes only: the reference drops regressors near degeneracy
        n = 2 * p + extra
        r = np.random.default_rng(seed)
        X = r.standard_normal((n, p))
        y = X @ r.standard_normal(p) + 0.1 * r.standard_normal(n)
        path = lars_select(X, y)
        # the reference works on centered, unit-norm columns
        Xc = X - X.mean(axis=0)
        norms = np.linalg.norm(Xc, axis=0)
        _, active, coefs = lars_path(Xc / norms, y - y.mean(), method="lar")
        k = min(len(active), len(path.entered))
        assert path.entered[:k] == list(active[:k])
        for step in range(1, k + 1):
            np.testing.assert_allclose(path.coefficients[step], coefs[:, step] / norms, atol=1e-8)

    @settings(max_examples=20, deadline=None)
    @given(seed=st.integers(0, 2**32 - 1), n=st.integers(3, 30), p=st.integers(2, 30))
    def test_equicorrelation(self, seed, n, p):
        r = np.random.default_rng(seed)
        X = r.standard_normal((n, p))
        y = r.standard_normal(n)
        path = lars_select(X, y)
        Xc = X - X.mean(axis=0)
        yc = y - y.mean()
        for k in range(1, len(path)):
            c = Xc.T @ (yc - Xc @ path.coefficients[k]) / np.linalg.norm(Xc, axis=0)
            act = path.entered[:k]
            C = np.abs(c[act])
            inactive = np.setdiff1d(np.arange(p), act)
            assert C.max() - C.min() <= 1e-9 * max(1.0, C.max())
            assert np.abs(c[inactive]).max(initial=0.0) <= C.max() + 1e-9

    @settings(max_examples=20, deadline=None)
    @given(seed=st.integers(0, 2**32 - 1))
    def test_orthonormal_design_orders_by_correlation(self, seed):
        r = np.random.default_rng(seed)
        fams = [Uniform(-1, 1)]
        rule = gauss_rule(fams[0], 12)
        A = design_matrix(fams, index_set("total-order", 1, 8), rule.points) * np.sqrt(rule.weights)[:, None]
        c = r.permutation(np.linspace(1.0, 8.0, 8)) * r.choice([-1.0, 1.0], 8)
        y = A[:, 1:] @ c
        path = lars_select(A[:, 1:], y, fit_intercept=False)
        assert path.entered == list(np.argsort(-np.abs(A[:, 1:].T @ y)))


class TestLoo:
    @settings(max_examples=25, deadline=None)
    @given(seed=st.integers(0, 2**32 - 1), n=st.integers(5, 50), k=st.integers(1, 4))
    def test_matches_explicit_refits(self, seed, n, k):
        r = np.random.default_rng(seed)
        A = np.column_stack([np.ones(n), r.standard_normal((n, k))])
        y = r.standard_normal(n)
        if k + 1 >= n:
            return
        exact = explicit_loo(A, y)
        assert loo_error(A, y) == pytest.approx(exact, rel=1e-9, abs=1e-9)

    def test_too_many_columns(self, rng):
        assert loo_error(rng.standard_normal((4, 4)), rng.standard_normal(4)) == np.inf


class TestAdaptive:
    def test_sparse_target_recovered(self, rng):
        fams = [Uniform(-1, 1)] * 6
        iset = index_set("total-order", 6, 4)
        target = int(np.flatnonzero((iset.indices == [1, 1, 0, 0, 0, 0]).all(axis=1))[0])

        def f(X):
            return design_matrix(fams, iset, X)[:, target]

        X = sample_inputs(fams, 30, rng)
        s = adaptive_lars_fit(SampleSet(X, f(X)), fams, p_max=4)
        assert [1, 1, 0, 0, 0, 0] in s.index_set.indices.tolist()
        Xt = sample_inputs(fams, 2000, rng)
        assert np.sqrt(np.mean((evaluate(s, Xt) - f(Xt)) ** 2)) < 1e-6

    def test_constant_target(self, rng):
        fams = [Uniform(-1, 1)] * 3
        X = sample_inputs(fams, 20, rng)
        with warnings.catch_warnings():
            warnings.simplefilter("ignore", RuntimeWarning)
            s = adaptive_lars_fit(SampleSet(X, np.full(20, 2.5)), fams)
        assert len(s.index_set) == 1
        assert s.coefficients[0] == pytest.approx(2.5)
        assert s.diagnostics["loo_error"] == pytest.approx(0.0, abs=1e-20)

    def test_refit_not_worse_than_path(self, rng):
        fams = [Uniform(-1, 1)] * 3
        X = sample_inputs(fams, 25, rng)
        y = np.exp(X[:, 0]) + X[:, 1] * X[:, 2]
        s = adaptive_lars_fit(SampleSet(X, y), fams, p_max=3)
        A = design_matrix(fams, index_set("total-order", 3, s.diagnostics["degree"]), X)
        path = lars_select(A[:, 1:], y, max_steps=len(y) - 2)
        path_resid = np.linalg.norm(A[:, 1:] @ path.coefficients[-1] + path.intercepts[-1] - y)
        assert s.diagnostics["residual"] <= path_resid + 1e-12
