import itertools

import numpy as np
import pytest

from stregion.errors import DisconnectedClusterError, DisconnectedGraphError, GraphError
from stregion.graph import (
    EdgeIndicatorVector,
    Partition,
    SpatialGraph,
    SpanningTree,
    assign_compatibility_weights,
    grid_graph,
    indicators_from_partition,
    is_compatible,
    partition_from_indicators,
    partition_is_contiguous,
    prim_mst,
    sample_compatible_tree,
)


def path_graph(n):
    return SpatialGraph.from_edges(n, [(i, i + 1) for i in range(n - 1)])


def all_spanning_trees(graph):
    """Brute-force enumeration over edge subsets of size n-1."""
    n = graph.n_areas
    trees = []
    for combo in itertools.combinations(range(graph.n_edges), n - 1):
        bits = np.ones(n - 1, dtype=np.uint8)
        try:
            tree = SpanningTree(graph=graph, tree_edges=tuple(combo))
        except GraphError:
            continue
        # spanning iff pruning nothing yields a single component
        if partition_from_indicators(tree, bits).k == 1:
            trees.append(tree)
    return trees


class TestSpatialGraph:
    def test_canonical_edge_order(self):
        g = SpatialGraph.from_edges(4, [(3, 2), (1, 0), (2, 0)])
        assert g.edges.tolist() == [[0, 1], [0, 2], [2, 3]]

    def test_rejects_self_loop_and_bad_ids(self):
        with pytest.raises(GraphError):
            SpatialGraph.from_edges(3, [(0, 0)])
        with pytest.raises(GraphError):
            SpatialGraph.from_edges(3, [(0, 5)])

    def test_deduplicates(self):
        g = SpatialGraph.from_edges(3, [(0, 1), (1, 0), (1, 2)])
        assert g.n_edges == 2

    def test_disconnected_rejected(self):
        with pytest.raises(DisconnectedGraphError) as exc:
            SpatialGraph.from_edges(4, [(0, 1), (2, 3)])
        assert exc.value.area == 2

    def test_grid(self):
        g = grid_graph(3, 4)
        assert g.n_areas == 12
        assert g.n_edges == 3 * 3 + 2 * 4  # horizontal + vertical


class TestPrim:
    def test_path_graph_tree_is_itself(self):
        g = path_graph(3)
        tree = prim_mst(g, [0.7, 0.2])
        assert tree.tree_edges == (0, 1)

    def test_triangle_minimum(self):
        # enumerate the 3 spanning trees of a triangle and pick min total weight
        g = SpatialGraph.from_edges(3, [(0, 1), (1, 2), (0, 2)])
        weights = {(0, 1): 0.1, (1, 2): 0.2, (0, 2): 0.9}
        w = np.array([weights[tuple(e)] for e in g.edges.tolist()])
        tree = prim_mst(g, w)
        expected = {g.edge_index[(0, 1)], g.edge_index[(1, 2)]}
        assert set(tree.tree_edges) == expected

    def test_complete_graph_matches_bruteforce(self):
        rng = np.random.default_rng(42)
        g = SpatialGraph.from_edges(4, [(a, b) for a in range(4) for b in range(a + 1, 4)])
        trees = all_spanning_trees(g)
        assert len(trees) == 16  # Cayley: 4^2
        for _ in range(25):
            w = rng.random(g.n_edges)
            best = min(trees, key=lambda t: sum(w[e] for e in t.tree_edges))
            tree = prim_mst(g, w)
            assert set(tree.tree_edges) == set(best.tree_edges)

    def test_bruteforce_on_small_random_graphs(self):
        rng = np.random.default_rng(3)
        for n in (4, 5, 6):
            for _ in range(5):
                pairs = [(a, b) for a in range(n) for b in range(a + 1, n) if rng.random() < 0.7]
                try:
                    g = SpatialGraph.from_edges(n, pairs)
                except (DisconnectedGraphError, GraphError):
                    continue
                trees = all_spanning_trees(g)
                if not trees:
                    continue
                w = rng.random(g.n_edges)
                best = min(trees, key=lambda t: sum(w[e] for e in t.tree_edges))
                got = prim_mst(g, w)
                assert sum(w[e] for e in got.tree_edges) == pytest.approx(
                    sum(w[e] for e in best.tree_edges)
                )

    def test_disconnected_names_unreachable_area(self):
        g = SpatialGraph.from_edges(4, [(0, 1), (2, 3)], validate_connected=False)
        with pytest.raises(DisconnectedGraphError) as exc:
            prim_mst(g, np.ones(g.n_edges))
        assert exc.value.area in (2, 3)

    def test_nonfinite_weight_rejected(self):
        g = path_graph(3)
        with pytest.raises(GraphError):
            prim_mst(g, [np.nan, 1.0])


class TestCompatibilityWeights:
    def test_single_cluster_all_low(self):
        g = grid_graph(3, 3)
        rng = np.random.default_rng(0)
        w = assign_compatibility_weights(g, Partition.single_cluster(9), rng)
        assert np.all((0 <= w) & (w < 1))

    def test_all_singletons_all_high(self):
        g = grid_graph(2, 3)
        rng = np.random.default_rng(0)
        w = assign_compatibility_weights(g, Partition.from_labels(np.arange(6)), rng)
        assert np.all((10 <= w) & (w < 20))

    def test_two_cluster_split_on_cycle(self):
        # 4-cycle 0-1-3-2-0; split {0,1} vs {2,3}: boundary edges (0,2) and (1,3)
        g = SpatialGraph.from_edges(4, [(0, 1), (1, 3), (2, 3), (0, 2)])
        part = Partition.from_labels([0, 0, 1, 1])
        rng = np.random.default_rng(1)
        w = assign_compatibility_weights(g, part, rng)
        high = {tuple(e) for e, wt in zip(g.edges.tolist(), w) if wt >= 10}
        assert high == {(0, 2), (1, 3)}


class TestIndicators:
    def test_all_ones_single_cluster(self):
        g = grid_graph(2, 3)
        tree = prim_mst(g, np.random.default_rng(0).random(g.n_edges))
        part = partition_from_indicators(tree, np.ones(5, dtype=np.uint8))
        assert part.k == 1

    def test_all_zeros_singletons(self):
        g = grid_graph(2, 3)
        tree = prim_mst(g, np.random.default_rng(0).random(g.n_edges))
        part = partition_from_indicators(tree, np.zeros(5, dtype=np.uint8))
        assert part.k == 6
        assert all(m.size == 1 for m in part.members)

    def test_path_prune_definition(self):
        g = path_graph(3)
        tree = prim_mst(g, [0.5, 0.5])
        part = partition_from_indicators(tree, [1, 0])
        assert part == Partition.from_labels([0, 0, 1])

    def test_k_equals_zeros_plus_one(self):
        g = grid_graph(3, 3)
        rng = np.random.default_rng(7)
        tree = prim_mst(g, rng.random(g.n_edges))
        for _ in range(20):
            bits = (rng.random(8) < 0.6).astype(np.uint8)
            part = partition_from_indicators(tree, bits)
            assert part.k == int((bits == 0).sum()) + 1

    def test_round_trip(self):
        rng = np.random.default_rng(11)
        g = grid_graph(4, 4)
        tree = prim_mst(g, rng.random(g.n_edges))
        for _ in range(50):
            bits = (rng.random(15) < 0.5).astype(np.uint8)
            part = partition_from_indicators(tree, bits)
            assert np.array_equal(indicators_from_partition(tree, part), bits)

    def test_indicator_vector_invariant(self):
        g = path_graph(4)
        tree = prim_mst(g, np.ones(3))
        vec = EdgeIndicatorVector(tree=tree, bits=np.array([1, 0, 1], dtype=np.uint8))
        part = partition_from_indicators(tree, vec.bits)
        assert vec.n_removed == part.k - 1


class TestIsCompatible:
    def test_round_trip_true(self):
        rng = np.random.default_rng(5)
        g = grid_graph(3, 3)
        tree = prim_mst(g, rng.random(g.n_edges))
        bits = (rng.random(8) < 0.5).astype(np.uint8)
        part = partition_from_indicators(tree, bits)
        assert is_compatible(tree, part)

    def test_star_counterexample(self):
        # star center 0, leaves 1,2,3; {{1,2},{0,3}} cannot come from pruning
        g = SpatialGraph.from_edges(4, [(0, 1), (0, 2), (0, 3)])
        tree = prim_mst(g, np.ones(3))
        part = Partition.from_labels([0, 1, 1, 0])
        assert not is_compatible(tree, part)

    def test_single_cluster_always_compatible(self):
        rng = np.random.default_rng(9)
        g = grid_graph(3, 4)
        tree = prim_mst(g, rng.random(g.n_edges))
        assert is_compatible(tree, Partition.single_cluster(12))


class TestSampleCompatibleTree:
    def test_path_two_cluster(self):
        g = path_graph(3)
        part = Partition.from_labels([0, 0, 1])
        tree = sample_compatible_tree(g, part, np.random.default_rng(0))
        assert tree.tree_edges == (0, 1)
        bits = indicators_from_partition(tree, part)
        assert bits.tolist() == [1, 0]

    def test_compatibility_property_on_grid(self):
        rng = np.random.default_rng(123)
        g = grid_graph(6, 6)
        # build a random 4-cluster tree-induced partition, then resample trees
        base_tree = prim_mst(g, rng.random(g.n_edges))
        bits = np.ones(35, dtype=np.uint8)
        bits[rng.choice(35, size=3, replace=False)] = 0
        part = partition_from_indicators(base_tree, bits)
        assert part.k == 4
        for _ in range(1000):
            tree = sample_compatible_tree(g, part, rng)
            assert is_compatible(tree, part)

    def test_disconnected_cluster_rejected(self):
        g = path_graph(4)
        part = Partition.from_labels([0, 1, 0, 1])  # both clusters disconnected
        with pytest.raises(DisconnectedClusterError):
            sample_compatible_tree(g, part, np.random.default_rng(0))

    def test_contiguity_of_tree_partitions(self):
        rng = np.random.default_rng(17)
        g = grid_graph(5, 5)
        tree = prim_mst(g, rng.random(g.n_edges))
        for _ in range(100):
            bits = (rng.random(24) < 0.7).astype(np.uint8)
            part = partition_from_indicators(tree, bits)
            assert partition_is_contiguous(g, part)


class TestPartition:
    def test_label_free_equality(self):
        assert Partition.from_labels([2, 2, 5, 9]) == Partition.from_labels([0, 0, 1, 2])

    def test_canonical_by_smallest_member(self):
        part = Partition.from_labels([7, 3, 7, 1])
        assert part.labels.tolist() == [0, 1, 0, 2]

    def test_members(self):
        part = Partition.from_labels([0, 1, 0])
        assert [m.tolist() for m in part.members] == [[0, 2], [1]]
