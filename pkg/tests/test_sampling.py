"""Negative-sampler contracts: membership, cardinality, determinism,
fallback behavior, and the uniformity of the random sampler's marginals."""

import numpy as np
import pytest
from scipy import stats

from tempora.sampling import (
    HistoricalPairTracker,
    NegativeBatch,
    sample_historical_negatives,
    sample_random_negatives,
)


def rng(seed=0):
    return np.random.default_rng(seed)


class TestRandomSampler:
    def test_cardinality_range_and_timestamps(self):
        t = np.array([9.0, 11.0, 13.0])
        neg = sample_random_negatives([1, 2, 3], [2, 3, 1], t, num_nodes=3,
                                      rng=rng(5))
        assert len(neg) == 3
        np.testing.assert_array_equal(neg.t, t)
        assert neg.src.min() >= 1 and neg.src.max() <= 3
        assert neg.dst.min() >= 1 and neg.dst.max() <= 3
        assert not neg.fallback.any()

    def test_seed_determinism(self):
        t = np.arange(50, dtype=float)
        a = sample_random_negatives(np.ones(50), np.ones(50), t, 100, rng(7))
        b = sample_random_negatives(np.ones(50), np.ones(50), t, 100, rng(7))
        np.testing.assert_array_equal(a.src, b.src)
        np.testing.assert_array_equal(a.dst, b.dst)

    def test_empty_batch_rejected(self):
        with pytest.raises(ValueError):
            sample_random_negatives([], [], [], 5, rng(0))

    def test_marginals_uniform_chi_squared(self):
        """1e5 draws over 50 nodes; both endpoint marginals pass a
        chi-squared uniformity test at alpha = 0.01."""
        n_nodes, draws = 50, 100_000
        t = np.zeros(draws)
        neg = sample_random_negatives(np.ones(draws), np.ones(draws), t,
                                      n_nodes, rng(11))
        for marginal in (neg.src, neg.dst):
            counts = np.bincount(marginal, minlength=n_nodes + 1)[1:]
            _, p = stats.chisquare(counts)
            assert p > 0.01

    def test_endpoints_independent(self):
        """Self-loops appear at ~1/N rate, evidence u and v are drawn
        independently rather than as distinct pairs."""
        n_nodes, draws = 20, 50_000
        neg = sample_random_negatives(np.ones(draws), np.ones(draws),
                                      np.zeros(draws), n_nodes, rng(13))
        loop_rate = (neg.src == neg.dst).mean()
        assert abs(loop_rate - 1 / n_nodes) < 0.005


class TestHistoricalSampler:
    def test_single_candidate_forced(self):
        # history {(a,b)} = {(1,2)}, window positive (1,3): only legal
        # historical negative is (1,2)
        neg = sample_historical_negatives([1], [3], [4.0],
                                          history_pairs={(1, 2)},
                                          rng=rng(0), num_nodes=3)
        assert (int(neg.src[0]), int(neg.dst[0])) == (1, 2)
        assert not neg.fallback[0]
        assert neg.t[0] == 4.0

    def test_window_pairs_excluded(self):
        history = {(1, 2), (3, 4)}
        neg = sample_historical_negatives([1, 3], [2, 5], [1.0, 2.0],
                                          history_pairs=history,
                                          rng=rng(1), num_nodes=5)
        # (1,2) is in the window, leaving only (3,4); second sample
        # falls back
        emitted = set(zip(neg.src.tolist(), neg.dst.tolist()))
        assert (3, 4) in emitted
        assert (1, 2) not in {p for p, f in
                              zip(zip(neg.src.tolist(), neg.dst.tolist()),
                                  neg.fallback) if not f}
        assert neg.fallback.sum() == 1

    def test_exhausted_pool_without_fallback_raises(self):
        with pytest.raises(RuntimeError, match="exhausted"):
            sample_historical_negatives([1, 2], [3, 4], [1.0, 2.0],
                                        history_pairs=set(), rng=rng(0),
                                        allow_fallback=False)

    def test_without_replacement_within_batch(self):
        history = {(i, i + 1) for i in range(1, 21)}
        neg = sample_historical_negatives(np.full(15, 30), np.full(15, 31),
                                          np.zeros(15), history, rng(3),
                                          num_nodes=40)
        pairs = list(zip(neg.src.tolist(), neg.dst.tolist()))
        assert len(set(pairs)) == len(pairs)
        assert not neg.fallback.any()

    def test_membership_contract_randomized(self):
        """Hundreds of random batches: every non-fallback emitted pair is
        in history minus window; every fallback is flagged."""
        g = rng(17)
        for _ in range(300):
            n_nodes = int(g.integers(5, 30))
            hist_size = int(g.integers(0, 40))
            history = {(int(g.integers(1, n_nodes + 1)),
                        int(g.integers(1, n_nodes + 1)))
                       for _ in range(hist_size)}
            b = int(g.integers(1, 20))
            pos_src = g.integers(1, n_nodes + 1, size=b)
            pos_dst = g.integers(1, n_nodes + 1, size=b)
            pos_t = np.sort(g.uniform(0, 100, size=b))
            neg = sample_historical_negatives(pos_src, pos_dst, pos_t,
                                              history, g, num_nodes=n_nodes)
            window = set(zip(pos_src.tolist(), pos_dst.tolist()))
            legal = history - window
            for u, v, fb in zip(neg.src.tolist(), neg.dst.tolist(),
                                neg.fallback.tolist()):
                if not fb:
                    assert (u, v) in legal
            np.testing.assert_array_equal(neg.t, pos_t)
            assert len(neg) == b

    def test_seed_determinism(self):
        history = {(int(i), int(i + 1)) for i in range(1, 50)}
        a = sample_historical_negatives([60], [61], [0.0], history, rng(9),
                                        num_nodes=70)
        b = sample_historical_negatives([60], [61], [0.0], history, rng(9),
                                        num_nodes=70)
        np.testing.assert_array_equal(a.src, b.src)
        np.testing.assert_array_equal(a.dst, b.dst)


class TestPairTracker:
    def test_incremental_history(self):
        tr = HistoricalPairTracker()
        assert tr.pairs == set()
        tr.add_batch([1, 2], [2, 3])
        assert tr.pairs == {(1, 2), (2, 3)}
        tr.add_batch([1], [2])  # duplicate is a no-op
        assert tr.pairs == {(1, 2), (2, 3)}

    def test_from_edges(self):
        tr = HistoricalPairTracker.from_edges([5, 6], [6, 5])
        assert tr.pairs == {(5, 6), (6, 5)}

    def test_ordered_pairs_distinct(self):
        """(u,v) and (v,u) are different interactions."""
        tr = HistoricalPairTracker.from_edges([1], [2])
        assert (2, 1) not in tr.pairs
