"""Sobol' points and pick-freeze index estimates."""

import numpy as np
import pytest
from scipy.stats import qmc as scipy_qmc

from polyextrema.errors import ConfigError, ZeroVarianceError
from polyextrema.orthobasis import Uniform
from polyextrema.qmc import SobolSequence, max_dimension, pick_freeze, pick_freeze_estimate, sobol_points


class TestSequence:
    def test_first_points(self):
        np.testing.assert_array_equal(sobol_points(1, 3)[:, 0], [0.5, 0.75, 0.25])

    @pytest.mark.parametrize("dim", [1, 2, 5, 40, 300])
    def test_matches_reference(self, dim):
        ref = scipy_qmc.Sobol(dim, scramble=False).random_base2(11)[1:1025]
        np.testing.assert_array_equal(sobol_points(dim, 1024), ref)

    def test_unit_cube(self):
        P = sobol_points(20, 5000)
        assert P.min() >= 0.0 and P.max() < 1.0

    def test_deterministic(self):
        np.testing.assert_array_equal(sobol_points(7, 300, skip=4), sobol_points(7, 300, skip=4))

    def test_offsets_continue_the_sequence(self):
        seq = SobolSequence(3)
        np.testing.assert_array_equal(np.vstack([seq.points(10), seq.points(6, start=10)]),
                                      seq.points(16))

    def test_capacity(self):
        assert max_dimension() >= 50
        with pytest.raises(ConfigError):
            sobol_points(max_dimension() + 1, 4)

    def test_integration_beats_random(self):
        exact = 0.5**5
        rng = np.random.default_rng(0)
        for m in range(10, 15):
            n = 2**m
            q = abs(np.prod(sobol_points(5, n), axis=1).mean() - exact)
            mc = np.mean([abs(np.prod(rng.random((n, 5)), axis=1).mean() - exact) for _ in range(20)])
            assert q < mc


class TestPickFreeze:
    def test_linear(self):
        first, total = pick_freeze(lambda X: X[:, 0], [Uniform(0, 1)] * 2, [0], 2**12)
        assert first == pytest.approx(1.0, abs=0.01)
        assert total[0] == pytest.approx(1.0, abs=0.01)

    def test_pure_interaction(self):
        fams = [Uniform(-1, 1)] * 2
        est = pick_freeze_estimate(lambda X: X[:, 0] * X[:, 1], fams, 2**12)
        np.testing.assert_allclose(est.total, [1.0, 1.0], atol=0.02)
        np.testing.assert_allclose(est.first, [0.0, 0.0], atol=0.02)

    def test_evaluation_count(self):
        est = pick_freeze_estimate(lambda X: X.sum(axis=1) ** 2, [Uniform(0, 1)] * 4, 64)
        assert est.evaluations == 2 * (4 + 1) * 64

    def test_additive_totals_cover_first_order(self):
        fams = [Uniform(0, 1)] * 3
        n = 2**11
        est = pick_freeze_estimate(lambda X: X[:, 0] + 2 * X[:, 1] ** 2 + np.sin(3 * X[:, 2]), fams, n)
        # both sums equal one for an additive function; allow three standard errors
        assert est.total.sum() >= est.first.sum() - 3.0 / np.sqrt(n)
        assert est.first.sum() == pytest.approx(1.0, abs=0.05)

    def test_interaction_index_by_inclusion_exclusion(self):
        fams = [Uniform(-1, 1)] * 3
        est = pick_freeze_estimate(lambda X: X[:, 0] * X[:, 1] + X[:, 2], fams, 2**12,
                                   subsets=[(0, 1)], per_variable=False)
        # Var(x1 x2) = 1/9, Var(x3) = 1/3
        assert est.sobol((0, 1)) == pytest.approx(0.25, abs=0.02)

    def test_zero_variance(self):
        with pytest.raises(ZeroVarianceError):
            pick_freeze(lambda X: np.ones(len(X)), [Uniform(0, 1)] * 2, [0], 64)

    def test_bad_subset(self):
        with pytest.raises(ConfigError):
            pick_freeze(lambda X: X[:, 0], [Uniform(0, 1)] * 2, [3], 64)
