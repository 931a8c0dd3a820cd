import numpy as np
import pytest

from stregion.errors import ValidationError
from stregion.graph import (
    Partition,
    cluster_connected_in_graph,
    grid_graph,
    partition_is_contiguous,
)
from stregion.synthetic import (
    ScenarioSpec,
    build_noncontiguous_partition,
    builtin_scenarios,
    generate_dataset,
    grow_contiguous_partition,
    sim1_scenario,
    sim2_scenario,
    sim3_scenario,
)


def count_components(graph, members):
    members = list(map(int, members))
    remaining = set(members)
    comps = 0
    while remaining:
        comps += 1
        start = next(iter(remaining))
        stack = [start]
        remaining.discard(start)
        while stack:
            v = stack.pop()
            for w, _ in graph.adjacency[v]:
                if w in remaining:
                    remaining.discard(w)
                    stack.append(w)
    return comps


class TestPartitionGrowers:
    def test_contiguous_partitions(self):
        g = grid_graph(6, 6)
        rng = np.random.default_rng(0)
        for k in (2, 4, 7, 12):
            part = grow_contiguous_partition(g, k, rng)
            assert part.k == k
            assert partition_is_contiguous(g, part)

    def test_deterministic_given_seed(self):
        g = grid_graph(5, 5)
        a = grow_contiguous_partition(g, 4, np.random.default_rng(3))
        b = grow_contiguous_partition(g, 4, np.random.default_rng(3))
        assert a == b

    def test_noncontiguous_build(self):
        g = grid_graph(7, 10)
        part = build_noncontiguous_partition(g, [2, 3], 2, seed=5)
        comps = sorted(count_components(g, m) for m in part.members)
        assert comps == [1, 1, 2, 3]


class TestGenerateDataset:
    def test_equidispersed_baseline_is_offset_poisson(self):
        g = grid_graph(3, 3)
        spec = ScenarioSpec(
            name="baseline",
            graph=g,
            partitions=[Partition.single_cluster(9)] * 2,
            theta=[np.array([1.0])] * 2,
            beta=np.zeros(0),
            delta=np.zeros(0),
            overdispersed=False,
            weeks_per_season=26,
            offset_range=(8.0, 8.0),
        )
        ds, truth = generate_dataset(spec, np.random.default_rng(7))
        # y ~ Poisson(offset): mean and variance both equal the offset
        assert ds.y.mean() == pytest.approx(8.0, rel=0.02)
        assert ds.y.var() == pytest.approx(8.0, rel=0.05)
        assert np.all(truth.z == 1.0)

    def test_overdispersion_inflates_variance(self):
        # z is one draw per (area, season), so the marginal inflation
        # 1 + mu/psi = 21 shows up across seasons; many 1-week seasons expose it
        g = grid_graph(4, 4)
        part = Partition.single_cluster(16)
        S = 60
        spec = ScenarioSpec(
            name="over",
            graph=g,
            partitions=[part] * S,
            theta=[np.array([1.0])] * S,
            beta=np.zeros(0),
            delta=np.array([np.log(0.5)]),  # psi = 0.5
            overdispersed=True,
            weeks_per_season=1,
            offset_range=(10.0, 10.0),
            covariate_noise=0.0,
        )
        ds, truth = generate_dataset(spec, np.random.default_rng(11))
        ratios = ds.y.var(axis=1) / np.maximum(ds.y.mean(axis=1), 1e-9)
        assert ratios.mean() > 1.5
        # and close to the moment-formula factor 1 + mu/psi = 21
        assert 10.0 < ratios.mean() < 35.0

    def test_equidispersed_unit_ratio(self):
        g = grid_graph(4, 4)
        part = Partition.single_cluster(16)
        S = 60
        spec = ScenarioSpec(
            name="equi",
            graph=g,
            partitions=[part] * S,
            theta=[np.array([1.0])] * S,
            beta=np.zeros(0),
            delta=np.array([np.log(0.5)]),
            overdispersed=False,
            weeks_per_season=1,
            offset_range=(10.0, 10.0),
            covariate_noise=0.0,
        )
        ds, _ = generate_dataset(spec, np.random.default_rng(11))
        ratios = ds.y.var(axis=1) / np.maximum(ds.y.mean(axis=1), 1e-9)
        assert 0.7 < ratios.mean() < 1.4

    def test_truth_record_alignment(self):
        spec = sim1_scenario(1, True, graph=grid_graph(4, 5), n_seasons=3)
        ds, truth = generate_dataset(spec, np.random.default_rng(1))
        assert truth.labels.shape == (3, 20)
        assert ds.n_seasons == 3
        assert ds.n_weeks == 39
        assert len(truth.theta) == 3
        assert truth.psi.shape == (20, 3)

    def test_reproducible_bit_exact(self):
        spec = sim1_scenario(2, False, graph=grid_graph(4, 5), n_seasons=4)
        a, _ = generate_dataset(spec, np.random.default_rng(42))
        b, _ = generate_dataset(spec, np.random.default_rng(42))
        assert np.array_equal(a.y, b.y)
        assert np.array_equal(a.X, b.X)


class TestScenarioCatalog:
    def test_catalog_size_and_names(self):
        catalog = builtin_scenarios(grid_graph(4, 5))
        assert len(catalog) >= 9
        assert "sim1-scenario1-over" in catalog
        assert "sim2-scenario2" in catalog
        assert "sim3-noncontiguous" in catalog

    def test_sim2_scenario2_theta_table(self):
        spec = sim2_scenario(2, graph=grid_graph(4, 5))
        assert spec.theta[0].tolist() == [1.0, 10.0, 25.0, 45.0]
        assert spec.theta[1].tolist() == [1.0, 10.0, 25.0]
        assert spec.theta[2].tolist() == [1.0]
        assert spec.theta[3].tolist() == [1.0, 10.0]
        # season-periodic over the years
        assert spec.partitions[0] == spec.partitions[4]
        assert [p.k for p in spec.partitions[:4]] == [4, 3, 1, 2]

    def test_sim2_scenario1_cluster_counts(self):
        spec = sim2_scenario(1, graph=grid_graph(4, 5))
        assert [p.k for p in spec.partitions[:4]] == [4, 3, 1, 2]

    def test_sim1_scenario2_seasonal_counts(self):
        spec = sim1_scenario(2, False, graph=grid_graph(4, 5))
        assert [p.k for p in spec.partitions[:4]] == [4, 3, 2, 2]

    def test_sim3_has_disconnected_cluster(self):
        spec = sim3_scenario(graph=grid_graph(7, 10))
        g = spec.graph
        comps_summer = [count_components(g, m) for m in spec.partitions[0].members]
        assert sum(c == 2 for c in comps_summer) == 3
        comps_winter = [count_components(g, m) for m in spec.partitions[2].members]
        assert sorted(comps_winter) == [1, 2]
        comps_spring = [count_components(g, m) for m in spec.partitions[3].members]
        assert max(comps_spring) == 3

    def test_sim1_scenario3_twelve_formations(self):
        spec = sim1_scenario(3, True, graph=grid_graph(4, 5))
        ks = [p.k for p in spec.partitions]
        assert ks == [4, 4, 2, 3, 4, 6, 4, 2, 5, 6, 4, 3]

    def test_supplied_offsets_and_covariates(self):
        g = grid_graph(2, 3)
        S, T = 2, 8
        offs = np.linspace(3.0, 8.0, 6)
        X = np.random.default_rng(4).normal(size=(6, T, 2))
        spec = ScenarioSpec(
            name="real-inputs",
            graph=g,
            partitions=[Partition.single_cluster(6)] * S,
            theta=[np.array([2.0])] * S,
            beta=np.array([0.4, 0.1]),
            delta=np.zeros(0),
            overdispersed=False,
            weeks_per_season=4,
            offsets=offs,
            mean_covariates=X,
        )
        ds, _ = generate_dataset(spec, np.random.default_rng(0))
        assert np.allclose(ds.offset[:, 0], offs)
        assert np.allclose(ds.offset, ds.offset[:, :1])
        assert np.allclose(ds.X, X)

    def test_validation_rejects_mismatched_theta(self):
        g = grid_graph(2, 2)
        with pytest.raises(ValidationError):
            ScenarioSpec(
                name="bad",
                graph=g,
                partitions=[Partition.single_cluster(4)],
                theta=[np.array([1.0, 2.0])],
                beta=np.zeros(0),
                delta=np.zeros(0),
                overdispersed=False,
            )
