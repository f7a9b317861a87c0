import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from sgcrm import kendall
from sgcrm.exceptions import InsufficientSampleError, LengthMismatchError


def brute_tau(x, y):
    n = len(x)
    s = 0
    for i in range(n):
        for j in range(i + 1, n):
            s += int(np.sign((x[i] - x[j]) * (y[i] - y[j])))
    return s / (n * (n - 1) / 2)


class TestTauPair:
    def test_perfect_concordance(self):
        assert kendall.tau_pair([1, 2, 3], [1, 2, 3]) == 1.0

    def test_perfect_discordance(self):
        assert kendall.tau_pair([1, 2, 3], [3, 2, 1]) == -1.0

    def test_enumerated_third(self):
        # all 6 pairs: concordant 4, discordant 2 -> 2/6... sign sum = 2 -> 1/3
        assert kendall.tau_pair([1, 2, 3, 4], [2, 1, 4, 3]) == pytest.approx(1 / 3)
        assert brute_tau([1, 2, 3, 4], [2, 1, 4, 3]) == pytest.approx(1 / 3)

    def test_tied_pair(self):
        assert kendall.tau_pair([1, 1, 2], [1, 2, 3]) == pytest.approx(2 / 3)
        assert brute_tau([1, 1, 2], [1, 2, 3]) == pytest.approx(2 / 3)

    def test_length_mismatch(self):
        with pytest.raises(LengthMismatchError):
            kendall.tau_pair([1, 2], [1, 2, 3])

    def test_too_short(self):
        with pytest.raises(InsufficientSampleError):
            kendall.tau_pair([1.0], [2.0])

    def test_matches_brute_force_exactly(self, rng):
        for trial in range(80):
            n = int(rng.integers(2, 50))
            x = rng.integers(0, 5, n).astype(float) if trial % 2 else rng.standard_normal(n)
            y = rng.integers(0, 4, n).astype(float) if trial % 3 else rng.standard_normal(n)
            assert kendall.tau_pair(x, y) == brute_tau(x, y)

    def test_self_tau_with_ties(self, rng):
        for _ in range(20):
            n = int(rng.integers(3, 40))
            x = rng.integers(0, 4, n).astype(float)
            n0 = n * (n - 1) // 2
            ties = sum(int(c * (c - 1) // 2) for c in np.bincount(x.astype(int)))
            assert kendall.tau_pair(x, x) == (n0 - ties) / n0

    @given(st.lists(st.integers(-500, 500), min_size=2, max_size=60),
           st.sampled_from(["exp", "cube", "rank"]))
    @settings(max_examples=60, deadline=None)
    def test_monotone_transform_invariance(self, codes, which):
        # well-separated inputs keep the transforms strictly increasing as
        # float maps (no rounding-induced ties)
        x = np.asarray(codes, dtype=float) * 0.01
        y = np.linspace(0, 1, x.size) ** 2
        if which == "exp":
            tx = np.exp(x)
        elif which == "cube":
            tx = x ** 3
        else:
            if np.unique(x).size != x.size:
                return
            tx = np.argsort(np.argsort(x, kind="stable"), kind="stable").astype(float)
        assert kendall.tau_pair(tx, y) == kendall.tau_pair(x, y)


class TestTauMatrix:
    def test_single_column(self, rng):
        res = kendall.tau_matrix(rng.standard_normal((10, 1)))
        assert res.tau.shape == (1, 1) and res.tau[0, 0] == 1.0

    def test_identical_columns(self, rng):
        x = rng.standard_normal(30)
        res = kendall.tau_matrix(np.column_stack([x, x]))
        assert res.tau[0, 1] == 1.0

    def test_equals_brute_force(self, rng):
        vals = np.column_stack([
            rng.standard_normal(200),
            rng.integers(0, 3, 200).astype(float),
            rng.integers(0, 2, 200).astype(float),
            np.maximum(rng.standard_normal(200), 0.0),
            rng.standard_normal(200),
        ])
        res = kendall.tau_matrix(vals)
        for j in range(5):
            for k in range(j):
                assert res.tau[j, k] == brute_tau(vals[:, j], vals[:, k])

    def test_row_permutation_invariance(self, rng):
        vals = rng.standard_normal((100, 3))
        vals[:, 1] = np.round(vals[:, 1])
        perm = rng.permutation(100)
        a = kendall.tau_matrix(vals).tau
        b = kendall.tau_matrix(vals[perm]).tau
        assert np.array_equal(a, b)

    def test_pairwise_complete_missing(self, rng):
        vals = rng.standard_normal((60, 2))
        vals[:10, 0] = np.nan
        res = kendall.tau_matrix(vals)
        assert res.tau[0, 1] == kendall.tau_pair(vals[10:, 0], vals[10:, 1])


class TestHFunction:
    def test_all_equal_to_anchor(self):
        assert kendall.h_function([2, 2, 2], [3, 3, 3], 2, 3) == 0.0

    def test_all_positive(self):
        assert kendall.h_function([1, 2], [1, 2], 0, 0) == 1.0

    def test_direct_loop_oracle(self, rng):
        x = rng.standard_normal(50)
        y = rng.integers(0, 3, 50).astype(float)
        a, b = 0.3, 1.0
        direct = np.mean([np.sign(xi - a) * np.sign(yi - b) for xi, yi in zip(x, y)])
        assert kendall.h_function(x, y, a, b) == pytest.approx(direct, abs=1e-15)


class TestVkHat:
    def test_matches_brute_force(self, rng):
        vals = np.column_stack([
            rng.standard_normal(50),
            rng.integers(0, 3, 50).astype(float),
            np.maximum(rng.standard_normal(50), 0.0),
        ])
        fast = kendall.vk_hat(vals).matrix
        pairs = kendall.pair_order(3)
        H = np.zeros((len(pairs), 50))
        taus = np.zeros(len(pairs))
        for a, (j, k) in enumerate(pairs):
            for m in range(50):
                H[a, m] = np.mean(np.sign(vals[:, j] - vals[m, j])
                                  * np.sign(vals[:, k] - vals[m, k]))
            taus[a] = brute_tau(vals[:, j], vals[:, k])
        slow = 4 * (H @ H.T / 50 - np.outer(taus, taus))
        assert np.linalg.norm(fast - slow) / np.linalg.norm(slow) < 1e-10

    def test_diagonal_nonnegative(self, rng):
        vals = np.column_stack([rng.integers(0, 2, 80).astype(float),
                                rng.standard_normal(80)])
        vk = kendall.vk_hat(vals)
        assert np.all(vk.matrix.diagonal() >= -1e-12)

    def test_insufficient_sample(self):
        with pytest.raises(InsufficientSampleError):
            kendall.vk_hat(np.zeros((2, 3)))

    def test_independent_continuous_diagonal(self, rng):
        # asymptotic variance of sqrt(n) tau-hat for independent continuous
        # pairs is 4/9 (MC-derived constant)
        vals = rng.standard_normal((100_000, 2))
        vk = kendall.vk_hat(vals)
        assert abs(vk.matrix[0, 0] - 4 / 9) < 0.02

    def test_fast_path_equals_blocked_path(self, rng):
        x = rng.standard_normal(500)
        y = rng.standard_normal(500)
        fast = kendall._h_profile(x, y)
        direct = np.array([kendall.h_function(x, y, x[m], y[m]) for m in range(500)])
        assert np.allclose(fast, direct, atol=1e-12)
