"""Spatial graphs, spanning trees, and tree-induced contiguous partitions.

The canonical edge ordering is lexicographic by (min area id, max area id);
edge indicator vectors, serialized partitions, and all sweeps over tree
edges follow it so that chains are reproducible across runs and platforms.
"""
from __future__ import annotations

import heapq
from dataclasses import dataclass
from functools import cached_property

import numpy as np

from .errors import DisconnectedClusterError, DisconnectedGraphError, GraphError

# Within/cross cluster weight ranges used when resampling a tree compatible
# with a partition.  Arbitrary, as long as cross >> within.
WITHIN_WEIGHT_RANGE = (0.0, 1.0)
CROSS_WEIGHT_RANGE = (10.0, 20.0)


@dataclass(frozen=True)
class SpatialGraph:
    """Undirected graph over areas 0..n_areas-1 with canonical edge indexing."""

    n_areas: int
    edges: np.ndarray  # (m, 2) int64, each row (a, b) with a < b, lexicographically sorted

    @classmethod
    def from_edges(cls, n_areas: int, pairs, validate_connected: bool = True) -> "SpatialGraph":
        """Build a graph from an iterable of unordered area pairs.

        Pairs are deduplicated and stored in canonical order. Raises GraphError
        on self-loops or out-of-range ids, DisconnectedGraphError if the graph
        does not span all areas (unless validate_connected=False).
        """
        if n_areas < 1:
            raise GraphError("graph needs at least one area")
        seen = set()
        for a, b in pairs:
            a, b = int(a), int(b)
            if a == b:
                raise GraphError(f"self-loop on area {a}")
            if not (0 <= a < n_areas and 0 <= b < n_areas):
                raise GraphError(f"edge ({a},{b}) references an area outside 0..{n_areas - 1}")
            seen.add((min(a, b), max(a, b)))
        edges = np.array(sorted(seen), dtype=np.int64).reshape(-1, 2)
        graph = cls(n_areas=n_areas, edges=edges)
        if validate_connected:
            unreachable = graph._first_unreachable()
            if unreachable is not None:
                raise DisconnectedGraphError(unreachable)
        return graph

    @property
    def n_edges(self) -> int:
        return self.edges.shape[0]

    @cached_property
    def adjacency(self) -> list[list[tuple[int, int]]]:
        """Per-area list of (neighbor, canonical edge index)."""
        adj: list[list[tuple[int, int]]] = [[] for _ in range(self.n_areas)]
        for idx, (a, b) in enumerate(self.edges):
            adj[a].append((int(b), idx))
            adj[b].append((int(a), idx))
        return adj

    @cached_property
    def edge_index(self) -> dict[tuple[int, int], int]:
        return {(int(a), int(b)): i for i, (a, b) in enumerate(self.edges)}

    def _first_unreachable(self) -> int | None:
        if self.n_areas == 1:
            return None
        reached = np.zeros(self.n_areas, dtype=bool)
        stack = [0]
        reached[0] = True
        while stack:
            v = stack.pop()
            for w, _ in self.adjacency[v]:
                if not reached[w]:
                    reached[w] = True
                    stack.append(w)
        missing = np.flatnonzero(~reached)
        return int(missing[0]) if missing.size else None


def grid_graph(n_rows: int, n_cols: int) -> SpatialGraph:
    """Rook-adjacency grid; areas numbered row-major."""
    pairs = []
    for r in range(n_rows):
        for c in range(n_cols):
            i = r * n_cols + c
            if c + 1 < n_cols:
                pairs.append((i, i + 1))
            if r + 1 < n_rows:
                pairs.append((i, i + n_cols))
    return SpatialGraph.from_edges(n_rows * n_cols, pairs)


@dataclass(frozen=True)
class SpanningTree:
    """Spanning tree of a graph, stored as sorted canonical edge indices."""

    graph: SpatialGraph
    tree_edges: tuple[int, ...]  # ascending canonical indices, length n_areas - 1

    def __post_init__(self):
        expected = self.graph.n_areas - 1
        if len(self.tree_edges) != expected:
            raise GraphError(f"spanning tree needs {expected} edges, got {len(self.tree_edges)}")
        if list(self.tree_edges) != sorted(self.tree_edges):
            object.__setattr__(self, "tree_edges", tuple(sorted(self.tree_edges)))

    @cached_property
    def edge_pairs(self) -> np.ndarray:
        """(n-1, 2) endpoint pairs in tree-edge order."""
        return self.graph.edges[list(self.tree_edges)].copy()

    @cached_property
    def adjacency(self) -> list[list[tuple[int, int]]]:
        """Per-area (neighbor, position-in-tree) pairs; positions index bits vectors."""
        adj: list[list[tuple[int, int]]] = [[] for _ in range(self.graph.n_areas)]
        for pos, (a, b) in enumerate(self.edge_pairs):
            adj[a].append((int(b), pos))
            adj[b].append((int(a), pos))
        return adj


@dataclass(frozen=True)
class Partition:
    """Partition of areas into clusters 0..k-1, canonicalized by smallest member.

    Label equality is therefore label-free: two partitions with the same
    blocks compare equal regardless of how the input labels were numbered.
    """

    labels: np.ndarray  # (n,) int64
    k: int

    @classmethod
    def from_labels(cls, labels) -> "Partition":
        labels = np.asarray(labels, dtype=np.int64)
        if labels.ndim != 1 or labels.size < 1:
            raise GraphError("labels must be a non-empty 1-d array")
        canon = np.empty_like(labels)
        mapping: dict[int, int] = {}
        for i, lab in enumerate(labels):
            lab = int(lab)
            if lab not in mapping:
                mapping[lab] = len(mapping)
            canon[i] = mapping[lab]
        canon.flags.writeable = False
        return cls(labels=canon, k=len(mapping))

    @classmethod
    def single_cluster(cls, n: int) -> "Partition":
        return cls.from_labels(np.zeros(n, dtype=np.int64))

    @property
    def n_areas(self) -> int:
        return self.labels.size

    @cached_property
    def members(self) -> list[np.ndarray]:
        return [np.flatnonzero(self.labels == j) for j in range(self.k)]

    def __eq__(self, other) -> bool:
        return isinstance(other, Partition) and np.array_equal(self.labels, other.labels)

    def __hash__(self) -> int:
        return hash(self.labels.tobytes())


@dataclass(frozen=True)
class EdgeIndicatorVector:
    """Per-tree-edge keep/remove bits: 1 keeps the edge, 0 removes it."""

    tree: SpanningTree
    bits: np.ndarray  # (n-1,) uint8 aligned with tree.tree_edges order

    def __post_init__(self):
        bits = np.asarray(self.bits, dtype=np.uint8)
        if bits.shape != (self.tree.graph.n_areas - 1,):
            raise GraphError("indicator length must equal number of tree edges")
        bits.flags.writeable = False
        object.__setattr__(self, "bits", bits)

    @property
    def n_removed(self) -> int:
        return int(np.sum(self.bits == 0))


def prim_mst(graph: SpatialGraph, weights) -> SpanningTree:
    """Minimum spanning tree via Prim's algorithm.

    Ties are broken by canonical edge index, so the result is deterministic;
    with distinct weights it is the unique MST. Raises DisconnectedGraphError
    naming an unreachable area if the graph is not connected.
    """
    weights = np.asarray(weights, dtype=float)
    if weights.shape != (graph.n_edges,):
        raise GraphError(f"need one weight per edge ({graph.n_edges}), got shape {weights.shape}")
    if not np.all(np.isfinite(weights)):
        raise GraphError("edge weights must be finite")
    n = graph.n_areas
    in_tree = np.zeros(n, dtype=bool)
    in_tree[0] = True
    chosen: list[int] = []
    heap: list[tuple[float, int, int]] = []
    for nbr, idx in graph.adjacency[0]:
        heapq.heappush(heap, (weights[idx], idx, nbr))
    while heap and len(chosen) < n - 1:
        _, idx, node = heapq.heappop(heap)
        if in_tree[node]:
            continue
        in_tree[node] = True
        chosen.append(idx)
        for nbr, eidx in graph.adjacency[node]:
            if not in_tree[nbr]:
                heapq.heappush(heap, (weights[eidx], eidx, nbr))
    if len(chosen) < n - 1:
        unreachable = int(np.flatnonzero(~in_tree)[0])
        raise DisconnectedGraphError(unreachable)
    return SpanningTree(graph=graph, tree_edges=tuple(sorted(chosen)))


def assign_compatibility_weights(
    graph: SpatialGraph,
    partition: Partition,
    rng: np.random.Generator,
    within_range: tuple[float, float] = WITHIN_WEIGHT_RANGE,
    cross_range: tuple[float, float] = CROSS_WEIGHT_RANGE,
) -> np.ndarray:
    """Edge weights that force an MST to respect the partition.

    Within-cluster edges draw from the low range, cross-cluster edges from the
    high range, so every MST keeps clusters intact.
    """
    if partition.n_areas != graph.n_areas:
        raise GraphError("partition and graph must cover the same areas")
    labels = partition.labels
    cross = labels[graph.edges[:, 0]] != labels[graph.edges[:, 1]]
    w = rng.uniform(*within_range, size=graph.n_edges)
    w[cross] = rng.uniform(*cross_range, size=int(cross.sum()))
    return w


def cluster_connected_in_graph(graph: SpatialGraph, members: np.ndarray) -> bool:
    """True iff the member set induces a connected subgraph of the graph."""
    if members.size <= 1:
        return True
    member_set = set(int(m) for m in members)
    seen = {int(members[0])}
    stack = [int(members[0])]
    while stack:
        v = stack.pop()
        for w, _ in graph.adjacency[v]:
            if w in member_set and w not in seen:
                seen.add(w)
                stack.append(w)
    return len(seen) == len(member_set)


def partition_is_contiguous(graph: SpatialGraph, partition: Partition) -> bool:
    return all(cluster_connected_in_graph(graph, m) for m in partition.members)


def sample_compatible_tree(
    graph: SpatialGraph, partition: Partition, rng: np.random.Generator
) -> SpanningTree:
    """Random spanning tree compatible with the partition.

    Compatible means pruning exactly the cross-cluster tree edges reproduces
    the partition. Requires every cluster to induce a connected subgraph;
    otherwise DisconnectedClusterError.
    """
    for j, members in enumerate(partition.members):
        if not cluster_connected_in_graph(graph, members):
            raise DisconnectedClusterError(j)
    weights = assign_compatibility_weights(graph, partition, rng)
    return prim_mst(graph, weights)


def partition_from_indicators(tree: SpanningTree, bits) -> Partition:
    """Connected components after deleting the zero-bit tree edges."""
    bits = np.asarray(bits, dtype=np.uint8)
    n = tree.graph.n_areas
    if bits.shape != (n - 1,):
        raise GraphError(f"need {n - 1} bits, got shape {bits.shape}")
    labels = np.full(n, -1, dtype=np.int64)
    next_label = 0
    for start in range(n):
        if labels[start] >= 0:
            continue
        labels[start] = next_label
        stack = [start]
        while stack:
            v = stack.pop()
            for w, pos in tree.adjacency[v]:
                if bits[pos] and labels[w] < 0:
                    labels[w] = next_label
                    stack.append(w)
        next_label += 1
    return Partition.from_labels(labels)


def indicators_from_partition(tree: SpanningTree, partition: Partition) -> np.ndarray:
    """Bits keeping exactly the tree edges whose endpoints co-cluster."""
    pairs = tree.edge_pairs
    labels = partition.labels
    return (labels[pairs[:, 0]] == labels[pairs[:, 1]]).astype(np.uint8)


def is_compatible(tree: SpanningTree, partition: Partition) -> bool:
    """True iff pruning all cross-cluster tree edges yields exactly the partition."""
    if partition.n_areas != tree.graph.n_areas:
        return False
    bits = indicators_from_partition(tree, partition)
    return partition_from_indicators(tree, bits) == partition
