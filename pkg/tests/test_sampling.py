import numpy as np
import pytest
import scipy.stats

from kaczmarz_mismatch.errors import InvalidDistributionError
from kaczmarz_mismatch.sampling import (
    DiscreteSampler,
    build_sampler,
    check_probability_vector,
    replicate_rng,
)


def inverse_cdf_draws(p, rng, size):
    """Reference sampler: inverse CDF on the cumulative weights."""
    edges = np.cumsum(p)
    return np.searchsorted(edges, rng.random(size), side="right").clip(0, len(p) - 1)


class TestValidation:
    def test_negative_weight_rejected(self):
        with pytest.raises(InvalidDistributionError):
            check_probability_vector([0.5, 0.6, -0.1])

    def test_bad_sum_rejected(self):
        with pytest.raises(InvalidDistributionError):
            check_probability_vector([0.5, 0.4])

    def test_zero_weights_allowed(self):
        p = check_probability_vector([0.0, 1.0])
        assert p[0] == 0.0


class TestAliasSampler:
    def test_degenerate_always_first(self):
        sampler = build_sampler([1.0, 0.0])
        rng = replicate_rng(1)
        draws = sampler.draw_array(rng, 1000)
        assert np.all(draws == 0)

    def test_fair_coin_frequency(self):
        sampler = build_sampler([0.5, 0.5])
        rng = replicate_rng(2)
        draws = sampler.draw_array(rng, 10**6)
        freq0 = np.mean(draws == 0)
        assert 0.4985 <= freq0 <= 0.5015  # 3 sigma band for 1e6 Bernoulli(1/2)

    def test_three_point_frequencies_within_3_sigma(self):
        p = np.array([0.2, 0.3, 0.5])
        sampler = build_sampler(p)
        rng = replicate_rng(3)
        n = 10**6
        draws = sampler.draw_array(rng, n)
        for i, pi in enumerate(p):
            se = np.sqrt(pi * (1 - pi) / n)
            assert abs(np.mean(draws == i) - pi) <= 3 * se

    def test_zero_weight_never_drawn(self):
        sampler = build_sampler([0.4, 0.0, 0.6])
        rng = replicate_rng(4)
        draws = sampler.draw_array(rng, 10**5)
        assert not np.any(draws == 1)

    def test_scalar_draw_matches_distribution_support(self):
        sampler = build_sampler([0.25, 0.25, 0.5])
        rng = replicate_rng(5)
        draws = {sampler.draw(rng) for _ in range(200)}
        assert draws <= {0, 1, 2}

    def test_chi_square_vs_inverse_cdf(self):
        # Alias draws and inverse-CDF draws should be indistinguishable in
        # distribution on a random 50-point simplex vector.
        rng_p = replicate_rng(6)
        p = rng_p.random(50)
        p /= p.sum()
        sampler = DiscreteSampler(p)
        n = 10**6
        alias_counts = np.bincount(
            sampler.draw_array(replicate_rng(7), n), minlength=50
        )
        ref_counts = np.bincount(
            inverse_cdf_draws(p, replicate_rng(8), n), minlength=50
        )
        expected = p * n
        for counts in (alias_counts, ref_counts):
            result = scipy.stats.chisquare(counts, expected)
            assert result.pvalue > 0.001


class TestReplicateStreams:
    def test_same_seed_same_stream(self):
        a = replicate_rng(7, 0).random(64)
        b = replicate_rng(7, 0).random(64)
        np.testing.assert_array_equal(a, b)

    def test_different_replicates_differ(self):
        a = replicate_rng(7, 0).random(64)
        b = replicate_rng(7, 1).random(64)
        assert np.all(a != b)

    def test_pairwise_correlation_small(self):
        draws = np.stack(
            [replicate_rng(11, rid).random(10**4) for rid in range(100)]
        )
        corr = np.corrcoef(draws)
        off_diag = corr[~np.eye(100, dtype=bool)]
        assert np.max(np.abs(off_diag)) < 0.05
