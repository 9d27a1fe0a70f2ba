import math

import numpy as np
import pytest
from numpy.testing import assert_allclose

from rotlasso import (
    DesignMatrix,
    SeedSpec,
    SparseVector,
    maurey_sparsify,
    sparsification_error,
)

from conftest import gaussian_design


class TestSparsificationError:
    def test_identity(self):
        X = gaussian_design(10, 6, seed=1)
        b = SparseVector.from_dense(np.arange(1.0, 7.0))
        assert sparsification_error(X, b, b) == 0.0

    def test_orthonormal_axis_swap(self):
        n = 9
        X = DesignMatrix(np.eye(n)[:, :4] * math.sqrt(n), normalized=True)
        e1 = SparseVector(4, ((0, 1.0),))
        e2 = SparseVector(4, ((1, 1.0),))
        assert sparsification_error(X, e1, e2) == pytest.approx(math.sqrt(2 * n), rel=1e-12)

    def test_matches_direct_computation(self, rng):
        X = gaussian_design(12, 9, seed=3)
        b = rng.standard_normal(9)
        bp = rng.standard_normal(9)
        direct = np.linalg.norm(X.entries @ (b - bp))
        assert abs(sparsification_error(X, b, bp) - direct) <= 1e-12 * max(direct, 1.0)


class TestMaureySparsify:
    def test_already_sparse_short_circuits(self):
        X = gaussian_design(10, 20, seed=4)
        b = SparseVector(20, ((2, 1.5), (7, -0.5)))
        res = maurey_sparsify(X, b, 5, SeedSpec(1))
        assert res.beta_prime == b
        assert res.error == 0.0
        assert res.attempts == 0

    def test_zero_vector(self):
        X = gaussian_design(10, 6, seed=4)
        res = maurey_sparsify(X, np.zeros(6), 3, SeedSpec(1))
        assert res.beta_prime.nnz == 0
        assert res.error == 0.0

    def test_bound_holds_on_seeded_trials(self):
        n, d, s = 30, 50, 25
        attempts = []
        for t in range(200):
            X = gaussian_design(n, d, seed=900 + t)
            rng = np.random.default_rng(t)
            beta = rng.standard_normal(d)
            res = maurey_sparsify(X, beta, s, SeedSpec(5, t))
            l1 = np.abs(beta).sum()
            assert res.bound == pytest.approx(2 * math.sqrt(n) * l1 / math.sqrt(s), rel=1e-12)
            assert res.error <= res.bound
            assert res.beta_prime.nnz <= s
            attempts.append(res.attempts)
            # surrogate never gains l1 mass (tiny slack for float accumulation)
            assert res.beta_prime.norm_l1() <= l1 * (1 + 1e-12)
        assert np.median(attempts) <= 2

    def test_stored_error_matches_reverification(self):
        n, d, s = 30, 50, 25
        X = gaussian_design(n, d, seed=77)
        beta = np.full(d, 1.0)
        res = maurey_sparsify(X, beta, s, SeedSpec(9))
        recomputed = sparsification_error(X, beta, res.beta_prime)
        assert abs(recomputed - res.error) <= 1e-10

    def test_error_shrinks_with_s(self):
        n, d = 30, 60
        medians = {}
        for s in (8, 16, 32):
            errs = []
            for t in range(60):
                X = gaussian_design(n, d, seed=300 + t)
                beta = np.random.default_rng(1000 + t).standard_normal(d)
                errs.append(maurey_sparsify(X, beta, s, SeedSpec(2, t)).error)
            medians[s] = np.median(errs)
        assert medians[16] < medians[8]
        assert medians[32] < medians[16]
        for s in (8, 16):
            ratio = medians[s] / medians[2 * s]
            assert 1.1 <= ratio <= 1.9

    def test_determinism(self):
        X = gaussian_design(20, 40, seed=8)
        beta = np.random.default_rng(3).standard_normal(40)
        r1 = maurey_sparsify(X, beta, 10, SeedSpec(4))
        r2 = maurey_sparsify(X, beta, 10, SeedSpec(4))
        assert r1 == r2

    def test_rejects_bad_s(self):
        X = gaussian_design(5, 4, seed=1)
        with pytest.raises(ValueError):
            maurey_sparsify(X, np.ones(4), 0, SeedSpec(1))
