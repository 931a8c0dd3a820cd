import itertools
import math

import numpy as np
import pytest
from scipy.stats import betabinom, chisquare, kstest

from stregion.errors import ValidationError
from stregion.graph import (
    Partition,
    SpatialGraph,
    grid_graph,
    partition_from_indicators,
    prim_mst,
)
from stregion.partition_prior import (
    LOG_ZERO,
    LatentSeries,
    PartitionPriorHyper,
    cluster_count_prior_moments,
    cluster_count_prior_pmf,
    elicitation_grid,
    is_log_zero,
    log_partition_prior,
    prior_predictive_partitions,
    rho_autocorrelation,
    sample_prior_latents,
    sample_tree,
    window_sum,
)


def path_graph(n):
    return SpatialGraph.from_edges(n, [(i, i + 1) for i in range(n - 1)])


class TestLogPartitionPrior:
    def test_direct_substitution(self):
        g = path_graph(5)
        tree = prim_mst(g, np.ones(4))
        part = partition_from_indicators(tree, [1, 0, 1, 1])
        assert part.k == 2
        assert log_partition_prior(part, tree, 0.5) == pytest.approx(math.log(0.5**4))

    def test_single_cluster(self):
        g = path_graph(6)
        tree = prim_mst(g, np.ones(5))
        part = Partition.single_cluster(6)
        rho = 0.3
        assert log_partition_prior(part, tree, rho) == pytest.approx(5 * math.log(1 - rho))

    def test_incompatible_is_log_zero(self):
        g = SpatialGraph.from_edges(4, [(0, 1), (0, 2), (0, 3)])
        tree = prim_mst(g, np.ones(3))
        part = Partition.from_labels([0, 1, 1, 0])
        assert is_log_zero(log_partition_prior(part, tree, 0.5))

    def test_rho_out_of_range_rejected(self):
        g = path_graph(3)
        tree = prim_mst(g, np.ones(2))
        part = Partition.single_cluster(3)
        for bad in (0.0, 1.0, -0.2, 1.7):
            with pytest.raises(ValidationError):
                log_partition_prior(part, tree, bad)

    def test_normalizes_over_indicator_vectors(self):
        # product of independent Bernoulli removals sums to one over all 2^(n-1)
        rng = np.random.default_rng(4)
        g = grid_graph(3, 3)
        tree = prim_mst(g, rng.random(g.n_edges))
        for rho in (0.2, 0.5, 0.9):
            total = 0.0
            for bits in itertools.product([0, 1], repeat=8):
                part = partition_from_indicators(tree, np.array(bits, dtype=np.uint8))
                total += math.exp(log_partition_prior(part, tree, rho))
            assert total == pytest.approx(1.0, abs=1e-12)


class TestClusterCountMoments:
    def test_paper_grid_cells(self):
        # three representative cells of the published 70-area elicitation grid
        assert tuple(round(v) for v in cluster_count_prior_moments(70, 10, 100)) == (7, 9)
        assert tuple(round(v) for v in cluster_count_prior_moments(70, 0.01, 0.01)) == (36, 1167)
        assert tuple(round(v) for v in cluster_count_prior_moments(70, 1, 1)) == (36, 408)

    def test_monte_carlo_beta_binomial_oracle(self):
        # k-1 ~ BeBin(n-1, upsilon, kappa)
        rng = np.random.default_rng(99)
        n, ups, kap = 70, 1.0, 1.0
        rho = rng.beta(ups, kap, size=10**6)
        k = rng.binomial(n - 1, rho) + 1
        mean, var = cluster_count_prior_moments(n, ups, kap)
        assert k.mean() == pytest.approx(mean, rel=2e-3)
        assert k.var() == pytest.approx(var, rel=5e-3)

    def test_monotonicity(self):
        means_up = [cluster_count_prior_moments(50, u, 10)[0] for u in (0.5, 1, 5, 20)]
        assert means_up == sorted(means_up)
        means_k = [cluster_count_prior_moments(50, 5, k)[0] for k in (0.5, 1, 5, 20)]
        assert means_k == sorted(means_k, reverse=True)

    def test_pmf_matches_moments(self):
        n, ups, kap = 30, 3.0, 8.0
        pmf = cluster_count_prior_pmf(n, ups, kap)
        ks = np.arange(1, n + 1)
        mean, var = cluster_count_prior_moments(n, ups, kap)
        assert pmf.sum() == pytest.approx(1.0)
        assert (ks * pmf).sum() == pytest.approx(mean)
        assert ((ks - mean) ** 2 * pmf).sum() == pytest.approx(var)

    def test_elicitation_grid_shape(self):
        rows = elicitation_grid(70, [1, 10], [1, 50, 100])
        assert len(rows) == 6
        row = next(r for r in rows if r["upsilon"] == 10 and r["kappa"] == 100)
        assert round(row["mean_clusters"]) == 7


class TestRhoAutocorrelation:
    def test_zero_latents_give_zero(self):
        for s, l, q in [(1, 1, 1), (3, 2, 2), (5, 1, 3)]:
            assert rho_autocorrelation(s, l, q, 2.0, 3.0, np.zeros(12)) == 0.0

    def test_small_total_gives_one(self):
        c = np.ones(10)
        val = rho_autocorrelation(3, 1, 2, 1e-9, 1e-9, c)
        assert val == pytest.approx(1.0, abs=1e-6)

    def test_worked_example(self):
        # q=1, l=1, c=1, upsilon=kappa=1, s>=2: (2*1 + 2*2) / (4*4) = 6/16
        val = rho_autocorrelation(2, 1, 1, 1.0, 1.0, np.ones(4))
        assert val == pytest.approx(6 / 16)

    def test_monte_carlo_oracle(self):
        # simulate the latent chain with pinned c and compare sample correlation
        rng = np.random.default_rng(2024)
        n_rep = 200_000
        q, ups, kap, s, l = 2, 2.0, 5.0, 3, 1
        c = np.array([2, 0, 3, 1, 2], dtype=np.int64)
        w = rng.beta(ups, kap, n_rep)
        u = {}
        for season in range(1, s + l + 1):
            u[season] = rng.binomial(int(c[season - 1]), w)

        def rho_at(season):
            a = ups + sum(u.get(season - h, 0) for h in range(q + 1))
            b = kap + sum(
                (c[season - h - 1] if season - h >= 1 else 0) - u.get(season - h, 0)
                for h in range(q + 1)
            )
            return rng.beta(a, b)

        r1, r2 = rho_at(s), rho_at(s + l)
        closed = rho_autocorrelation(s, l, q, ups, kap, c)
        assert np.corrcoef(r1, r2)[0, 1] == pytest.approx(closed, abs=0.01)

    def test_lag_beyond_order_uses_empty_shared_sum(self):
        c = np.ones(10)
        ups = kap = 1.0
        # l > q: numerator keeps only the product of window totals
        val = rho_autocorrelation(3, 3, 1, ups, kap, c)
        sum_s = 2.0
        assert val == pytest.approx(sum_s * sum_s / ((2 + sum_s) * (2 + sum_s)))


class TestSamplePriorLatents:
    def test_zeta_zero_limit(self):
        hyper = PartitionPriorHyper(q=2)
        rng = np.random.default_rng(0)
        lat = sample_prior_latents(hyper, 6, rng, upsilon=2.0, kappa=3.0, zeta=1e-12)
        assert np.all(lat.c == 0)
        assert np.all(lat.u == 0)

    def test_support_constraint(self):
        hyper = PartitionPriorHyper(a_zeta=5.0, b_zeta=1.0, q=1)
        rng = np.random.default_rng(1)
        for _ in range(200):
            lat = sample_prior_latents(hyper, 4, rng)
            assert np.all(lat.u <= lat.c)

    def test_marginal_is_beta(self):
        # hierarchical draws of rho_s stay marginally Beta(upsilon, kappa)
        hyper = PartitionPriorHyper(a_zeta=1.0, b_zeta=1.0, q=2)
        rng = np.random.default_rng(7)
        for ups, kap in [(1.0, 1.0), (10.0, 100.0)]:
            draws = np.array(
                [
                    sample_prior_latents(hyper, 3, rng, upsilon=ups, kappa=kap).rho[2]
                    for _ in range(20_000)
                ]
            )
            stat = kstest(draws, "beta", args=(ups, kap)).statistic
            assert stat < 0.015

    def test_lengths_cover_horizon(self):
        hyper = PartitionPriorHyper(q=3)
        lat = sample_prior_latents(hyper, 5, np.random.default_rng(3))
        assert lat.rho.shape == (8,)
        assert lat.total_seasons == 8


class TestPriorPredictive:
    def test_rho_pinned_extremes(self):
        g = grid_graph(3, 3)
        hyper = PartitionPriorHyper(q=0)
        rng = np.random.default_rng(0)
        ones = prior_predictive_partitions(hyper, g, 2, 5, rng, rho=0.0)
        assert all(p.k == 1 for seasons in ones for p in seasons)
        singles = prior_predictive_partitions(hyper, g, 2, 5, rng, rho=1.0)
        assert all(p.k == g.n_areas for seasons in singles for p in seasons)

    def test_mean_cluster_count_matches_closed_form(self):
        g = grid_graph(7, 10)
        hyper = PartitionPriorHyper(q=1)
        rng = np.random.default_rng(11)
        draws = prior_predictive_partitions(hyper, g, 1, 10_000, rng, upsilon=10.0, kappa=100.0)
        ks = np.array([seasons[0].k for seasons in draws])
        mean, _ = cluster_count_prior_moments(70, 10.0, 100.0)
        assert abs(ks.mean() - mean) < 0.2

    def test_cluster_count_chisquare_vs_betabinom(self):
        # on a small graph the empirical k-1 law matches BeBin(n-1, ups, kap)
        g = grid_graph(2, 4)
        hyper = PartitionPriorHyper(q=1)
        rng = np.random.default_rng(29)
        ups, kap = 2.0, 3.0
        draws = prior_predictive_partitions(hyper, g, 1, 30_000, rng, upsilon=ups, kappa=kap)
        ks = np.array([seasons[0].k - 1 for seasons in draws])
        support = np.arange(g.n_areas)
        expected = betabinom.pmf(support, g.n_areas - 1, ups, kap) * ks.size
        observed = np.bincount(ks, minlength=g.n_areas).astype(float)
        keep = expected > 5
        stat, pvalue = chisquare(
            observed[keep], expected[keep] * observed[keep].sum() / expected[keep].sum()
        )
        assert pvalue > 0.01

    def test_contiguity(self):
        from stregion.graph import partition_is_contiguous

        g = grid_graph(4, 4)
        hyper = PartitionPriorHyper(q=1)
        rng = np.random.default_rng(5)
        draws = prior_predictive_partitions(hyper, g, 2, 50, rng)
        for seasons in draws:
            for p in seasons:
                assert partition_is_contiguous(g, p)


class TestWindowSum:
    def test_zero_padding_below_one(self):
        u = np.array([3, 1, 4], dtype=np.int64)
        assert window_sum(u, 1, 2) == 3
        assert window_sum(u, 2, 2) == 4
        assert window_sum(u, 3, 2) == 8
        assert window_sum(u, 3, 0) == 4
