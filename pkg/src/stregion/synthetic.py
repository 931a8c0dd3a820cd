"""Synthetic scenario generators for the simulation studies.

Scenarios pin per-season partitions and cluster intercepts, draw seasonal
sinusoid covariates standing in for temperature and humidity, and generate
counts from the observation model either equidispersed (z = 1) or
overdispersed (z from the unit-mean inverse Gaussian).
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import ValidationError
from .gig import sample_gig
from .graph import Partition, SpatialGraph, grid_graph
from .likelihood import Dataset


@dataclass
class ScenarioSpec:
    """Complete recipe for one synthetic dataset.

    Offsets and mean covariates are drawn synthetically unless explicit
    arrays are supplied (e.g. real populations or observed weather loaded
    from CSV), in which shapes must be (n_areas,) or (n_areas, n_weeks) for
    offsets and (n_areas, n_weeks, p1) for covariates.
    """

    name: str
    graph: SpatialGraph
    partitions: list[Partition]  # one per season
    theta: list[np.ndarray]  # per season, length k_s
    beta: np.ndarray
    delta: np.ndarray  # intercept first
    overdispersed: bool
    weeks_per_season: int = 13
    offset_range: tuple[float, float] = (5.0, 15.0)
    covariate_noise: float = 0.15
    offsets: np.ndarray | None = None
    mean_covariates: np.ndarray | None = None

    def __post_init__(self):
        if len(self.partitions) != len(self.theta):
            raise ValidationError("need one theta vector per season")
        for s, (part, th) in enumerate(zip(self.partitions, self.theta)):
            if part.n_areas != self.graph.n_areas:
                raise ValidationError(f"partition {s} does not cover the graph")
            if len(th) != part.k:
                raise ValidationError(f"theta length must match cluster count in season {s}")
            if np.any(np.asarray(th) <= 0):
                raise ValidationError("theta values must be positive")
        if self.offsets is not None:
            arr = np.asarray(self.offsets, dtype=float)
            if arr.ndim not in (1, 2) or arr.shape[0] != self.graph.n_areas:
                raise ValidationError("offsets must be (n_areas,) or (n_areas, n_weeks)")
            if np.any(arr <= 0):
                raise ValidationError("offsets must be positive")
        if self.mean_covariates is not None:
            arr = np.asarray(self.mean_covariates, dtype=float)
            if arr.ndim != 3 or arr.shape[:2] != (self.graph.n_areas, self.n_weeks):
                raise ValidationError("mean_covariates must be (n_areas, n_weeks, p1)")
            if arr.shape[2] != self.beta.size:
                raise ValidationError("mean_covariates width must match beta")

    @property
    def n_seasons(self) -> int:
        return len(self.partitions)

    @property
    def n_weeks(self) -> int:
        return self.n_seasons * self.weeks_per_season


@dataclass
class TruthRecord:
    """Ground truth retained for scoring fitted chains."""

    name: str
    labels: np.ndarray  # (S, n)
    theta: list[np.ndarray]
    beta: np.ndarray
    delta: np.ndarray
    z: np.ndarray  # (n, S)
    psi: np.ndarray  # (n, S)
    overdispersed: bool

    def to_jsonable(self) -> dict:
        return {
            "name": self.name,
            "labels": self.labels.tolist(),
            "theta": [t.tolist() for t in self.theta],
            "beta": self.beta.tolist(),
            "delta": self.delta.tolist(),
            "z": self.z.tolist(),
            "psi": self.psi.tolist(),
            "overdispersed": self.overdispersed,
        }


def _seasonal_covariates(n: int, weeks: np.ndarray, rng: np.random.Generator, noise: float):
    """Standardized sinusoids with per-area phase/level offsets."""
    phase = rng.uniform(0, 2 * np.pi)
    level = rng.normal(0.0, 0.3, size=n)
    year_pos = 2 * np.pi * (weeks % 52) / 52.0
    base = np.cos(year_pos[None, :] + phase)
    return base + level[:, None] + rng.normal(0.0, noise, size=(n, weeks.size))


def generate_dataset(
    spec: ScenarioSpec, rng: np.random.Generator
) -> tuple[Dataset, TruthRecord]:
    """Counts, covariates, and the ground truth for one scenario replicate."""
    n = spec.graph.n_areas
    S = spec.n_seasons
    T = spec.n_weeks
    weeks = np.arange(T)
    season_of_week = np.repeat(np.arange(S), spec.weeks_per_season)

    if spec.mean_covariates is not None:
        X = np.asarray(spec.mean_covariates, dtype=float)
        covs = [X[:, :, j] for j in range(X.shape[2])]
        while len(covs) < 2:
            covs.append(_seasonal_covariates(n, weeks, rng, spec.covariate_noise))
        temp, humid = covs[0], covs[1]
    else:
        temp = _seasonal_covariates(n, weeks, rng, spec.covariate_noise)
        humid = _seasonal_covariates(n, weeks, rng, spec.covariate_noise)
        X = np.stack([temp, humid], axis=2)[:, :, : spec.beta.size]

    v_cols = [np.ones((n, S))]
    for cov in (temp, humid):
        v_cols.append(
            np.stack([cov[:, season_of_week == s].mean(axis=1) for s in range(S)], axis=1)
        )
    V = np.stack(v_cols, axis=2)[:, :, : spec.delta.size]

    if spec.offsets is not None:
        supplied = np.asarray(spec.offsets, dtype=float)
        offset = np.tile(supplied[:, None], (1, T)) if supplied.ndim == 1 else supplied.copy()
        if offset.shape != (n, T):
            raise ValidationError("offsets must cover every (area, week)")
    else:
        offset = np.tile(rng.uniform(*spec.offset_range, size=(n, 1)), (1, T))

    psi = np.exp(V @ spec.delta) if spec.delta.size else np.ones((n, S))
    if spec.overdispersed:
        z = sample_gig(-0.5, psi, psi, rng)
    else:
        z = np.ones((n, S))

    theta_area = np.empty((n, S))
    labels = np.empty((S, n), dtype=np.int64)
    for s in range(S):
        labels[s] = spec.partitions[s].labels
        theta_area[:, s] = np.asarray(spec.theta[s])[labels[s]]

    lam = (np.exp(X @ spec.beta) if spec.beta.size else np.ones((n, T))) * theta_area[
        :, season_of_week
    ]
    rate = offset * lam * z[:, season_of_week]
    y = rng.poisson(rate)

    dataset = Dataset(y=y, offset=offset, X=X, V=V, season_of_week=season_of_week)
    truth = TruthRecord(
        name=spec.name,
        labels=labels,
        theta=[np.asarray(t, dtype=float) for t in spec.theta],
        beta=spec.beta.copy(),
        delta=spec.delta.copy(),
        z=z,
        psi=psi,
        overdispersed=spec.overdispersed,
    )
    return dataset, truth


def grow_contiguous_partition(
    graph: SpatialGraph, k: int, rng: np.random.Generator, seeds=None
) -> Partition:
    """Deterministic-seeded region growing: k connected clusters covering the graph."""
    n = graph.n_areas
    if not (1 <= k <= n):
        raise ValidationError("cluster count must lie in 1..n_areas")
    labels = np.full(n, -1, dtype=np.int64)
    if seeds is None:
        seeds = rng.choice(n, size=k, replace=False)
    frontiers: list[list[int]] = [[int(s)] for s in seeds]
    for j, s in enumerate(seeds):
        labels[s] = j
    remaining = n - k
    while remaining > 0:
        progressed = False
        for j in range(k):
            grown = False
            while frontiers[j] and not grown:
                v = frontiers[j][0]
                nbrs = [w for w, _ in graph.adjacency[v] if labels[w] < 0]
                if not nbrs:
                    frontiers[j].pop(0)
                    continue
                pick = int(nbrs[rng.integers(len(nbrs))])
                labels[pick] = j
                frontiers[j].append(pick)
                remaining -= 1
                grown = True
                progressed = True
            if remaining == 0:
                break
        if not progressed:
            # absorb any unreachable leftovers into an adjacent cluster
            for v in np.flatnonzero(labels < 0):
                for w, _ in graph.adjacency[v]:
                    if labels[w] >= 0:
                        labels[v] = labels[w]
                        remaining -= 1
                        break
    return Partition.from_labels(labels)


def _bfs_distances(graph: SpatialGraph, start: int) -> np.ndarray:
    dist = np.full(graph.n_areas, np.inf)
    dist[start] = 0
    queue = [start]
    while queue:
        v = queue.pop(0)
        for w, _ in graph.adjacency[v]:
            if dist[w] == np.inf:
                dist[w] = dist[v] + 1
                queue.append(w)
    return dist


def _farthest_point_seeds(graph: SpatialGraph, k: int, rng: np.random.Generator) -> list[int]:
    start = int(rng.integers(graph.n_areas))
    seeds = [start]
    dist = _bfs_distances(graph, start)
    while len(seeds) < k:
        nxt = int(np.argmax(dist))
        seeds.append(nxt)
        dist = np.minimum(dist, _bfs_distances(graph, nxt))
    return seeds


def _cluster_adjacency(graph: SpatialGraph, labels: np.ndarray) -> dict[int, set[int]]:
    k = int(labels.max()) + 1
    adj: dict[int, set[int]] = {j: set() for j in range(k)}
    for a, b in graph.edges:
        la, lb = int(labels[a]), int(labels[b])
        if la != lb:
            adj[la].add(lb)
            adj[lb].add(la)
    return adj


def _group_patches(adj: dict[int, set[int]], available: list[int], sizes: list[int]):
    """Exact search for disjoint groups of pairwise non-adjacent patches."""
    if not sizes:
        return []
    import itertools

    m, rest = sizes[0], sizes[1:]
    for combo in itertools.combinations(available, m):
        if any(b in adj[a] for a, b in itertools.combinations(combo, 2)):
            continue
        remaining = [p for p in available if p not in combo]
        tail = _group_patches(adj, remaining, rest)
        if tail is not None:
            return [list(combo)] + tail
    return None


def build_noncontiguous_partition(
    graph: SpatialGraph, component_counts: list[int], n_contiguous: int, seed: int
) -> Partition:
    """Partition whose first clusters split into the requested component counts.

    The split clusters' components grow as small patches from far-apart seeds;
    the contiguous clusters then flood the remaining areas.  Groups of
    pairwise non-adjacent patches are relabeled into single clusters so each
    falls apart into exactly the requested number of components.
    """
    n = graph.n_areas
    comp_units = int(sum(component_counts))
    base_k = comp_units + n_contiguous
    if base_k > n:
        raise ValidationError("too many clusters for the graph")
    patch_size = max(2, n // (3 * base_k))
    want = sorted(list(component_counts) + [1] * n_contiguous)
    for attempt in range(64):
        rng = np.random.default_rng([seed, attempt])
        seeds = _farthest_point_seeds(graph, base_k, rng)
        labels = np.full(n, -1, dtype=np.int64)
        frontiers: list[list[int]] = [[s] for s in seeds]
        for j, s in enumerate(seeds):
            labels[s] = j
        sizes = [1] * base_k
        # split-cluster components stay small so they end up well separated
        for _ in range(patch_size - 1):
            for j in range(comp_units):
                while frontiers[j]:
                    v = frontiers[j][0]
                    nbrs = [w for w, _ in graph.adjacency[v] if labels[w] < 0]
                    if not nbrs:
                        frontiers[j].pop(0)
                        continue
                    pick = int(nbrs[rng.integers(len(nbrs))])
                    labels[pick] = j
                    frontiers[j].append(pick)
                    sizes[j] += 1
                    break
        # contiguous clusters flood everything that remains
        remaining = int((labels < 0).sum())
        while remaining > 0:
            progressed = False
            for j in range(comp_units, base_k):
                while frontiers[j]:
                    v = frontiers[j][0]
                    nbrs = [w for w, _ in graph.adjacency[v] if labels[w] < 0]
                    if not nbrs:
                        frontiers[j].pop(0)
                        continue
                    pick = int(nbrs[rng.integers(len(nbrs))])
                    labels[pick] = j
                    frontiers[j].append(pick)
                    remaining -= 1
                    progressed = True
                    break
            if not progressed:
                break
        if remaining > 0:
            continue
        adj = _cluster_adjacency(graph, labels)
        groups = _group_patches(
            adj, list(range(comp_units)), sorted(component_counts, reverse=True)
        )
        if groups is None:
            continue
        merged_labels = labels.copy()
        for group in groups:
            for other in group[1:]:
                merged_labels[merged_labels == other] = group[0]
        merged = Partition.from_labels(merged_labels)
        counts = sorted(_count_components(graph, m) for m in merged.members)
        if counts == want:
            return merged
    raise ValidationError("could not realize the requested non-contiguous structure")


def _count_components(graph: SpatialGraph, members: np.ndarray) -> int:
    remaining = set(int(m) for m in members)
    comps = 0
    while remaining:
        comps += 1
        stack = [remaining.pop()]
        while stack:
            v = stack.pop()
            for w, _ in graph.adjacency[v]:
                if w in remaining:
                    remaining.discard(w)
                    stack.append(w)
    return comps


_SIM1_SCE3_THETA = {
    1: (1, 3, 5, 7), 2: (1, 3, 5, 7), 3: (5, 7), 4: (1, 3, 5),
    5: (1, 3, 5, 7), 6: (1, 3, 5, 7, 9, 11), 7: (1, 3, 5, 7), 8: (1, 3),
    9: (1, 3, 5, 7, 9), 10: (1, 3, 5, 7, 9, 11), 11: (1, 3, 5, 7), 12: (1, 3, 5),
}

_SIM2_THETA = {
    1: {0: (1, 3, 6, 9), 1: (1, 5, 9), 2: (1,), 3: (1, 4)},
    2: {0: (1, 10, 25, 45), 1: (1, 10, 25), 2: (1,), 3: (1, 10)},
    3: {0: (1, 3, 6, 9, 13), 1: (1, 3, 6, 9, 12, 16, 20, 25, 30, 35), 2: (1, 3, 6, 9), 3: (1, 4)},
    4: {0: (1, 10, 25, 45, 70), 1: (1, 9, 20, 35, 55, 75, 100, 120, 150, 180), 2: (1, 10, 25, 40), 3: (1, 15)},
}

_SIM3_THETA = {0: (1, 10, 25, 45), 1: (1, 5, 25), 2: (5, 20), 3: (1, 15)}

_BETA = np.array([0.4, 0.1])
_DELTA_SIM1 = np.array([-0.3, 0.2, -0.4])
_DELTA_SIM23 = np.array([3.5, 0.2, -0.4])


def sim1_scenario(
    scenario: int,
    overdispersed: bool,
    graph: SpatialGraph | None = None,
    n_seasons: int = 12,
    seed: int = 1,
    weeks_per_season: int = 13,
) -> ScenarioSpec:
    """PIG-vs-Poisson comparison scenarios: fixed, seasonal, or fully varying partitions."""
    graph = graph if graph is not None else grid_graph(7, 10)
    rng = np.random.default_rng([seed, scenario])
    if scenario == 1:
        base = grow_contiguous_partition(graph, 4, rng)
        partitions = [base] * n_seasons
        theta = [np.array([1.0, 3.0, 5.0, 7.0])] * n_seasons
    elif scenario == 2:
        per_season = {
            0: (grow_contiguous_partition(graph, 4, rng), np.array([1.0, 3.0, 5.0, 7.0])),
            1: (grow_contiguous_partition(graph, 3, rng), np.array([3.0, 5.0, 7.0])),
            2: (grow_contiguous_partition(graph, 2, rng), np.array([3.0, 5.0])),
            3: (grow_contiguous_partition(graph, 2, rng), np.array([1.0, 3.0])),
        }
        partitions = [per_season[s % 4][0] for s in range(n_seasons)]
        theta = [per_season[s % 4][1] for s in range(n_seasons)]
    elif scenario == 3:
        partitions, theta = [], []
        for s in range(1, n_seasons + 1):
            th = np.asarray(_SIM1_SCE3_THETA[(s - 1) % 12 + 1], dtype=float)
            partitions.append(grow_contiguous_partition(graph, len(th), rng))
            theta.append(th)
    else:
        raise ValidationError("scenario must be 1, 2, or 3")
    kind = "over" if overdispersed else "equi"
    return ScenarioSpec(
        name=f"sim1-scenario{scenario}-{kind}",
        graph=graph,
        partitions=partitions,
        theta=theta,
        beta=_BETA.copy(),
        delta=_DELTA_SIM1.copy(),
        overdispersed=overdispersed,
        weeks_per_season=weeks_per_season,
    )


def sim2_scenario(
    scenario: int,
    graph: SpatialGraph | None = None,
    n_seasons: int = 20,
    seed: int = 2,
    weeks_per_season: int = 13,
) -> ScenarioSpec:
    """Season-periodic partitions repeated over years, four intercept regimes."""
    if scenario not in _SIM2_THETA:
        raise ValidationError("scenario must be 1..4")
    graph = graph if graph is not None else grid_graph(7, 10)
    rng = np.random.default_rng([seed, scenario])
    theta_table = _SIM2_THETA[scenario]
    seasonal = {
        s: grow_contiguous_partition(graph, len(theta_table[s]), rng) for s in range(4)
    }
    partitions = [seasonal[s % 4] for s in range(n_seasons)]
    theta = [np.asarray(theta_table[s % 4], dtype=float) for s in range(n_seasons)]
    return ScenarioSpec(
        name=f"sim2-scenario{scenario}",
        graph=graph,
        partitions=partitions,
        theta=theta,
        beta=_BETA.copy(),
        delta=_DELTA_SIM23.copy(),
        overdispersed=True,
        weeks_per_season=weeks_per_season,
    )


def sim3_scenario(
    graph: SpatialGraph | None = None,
    n_seasons: int = 20,
    seed: int = 3,
    weeks_per_season: int = 13,
) -> ScenarioSpec:
    """Non-contiguous truth: clusters deliberately split across the map.

    Summer has three two-component clusters, autumn two, winter one
    two-component cluster, and spring one three-component cluster.
    """
    graph = graph if graph is not None else grid_graph(7, 10)
    seasonal = {
        0: build_noncontiguous_partition(graph, [2, 2, 2], 1, seed * 10 + 0),
        1: build_noncontiguous_partition(graph, [2, 2], 1, seed * 10 + 1),
        2: build_noncontiguous_partition(graph, [2], 1, seed * 10 + 2),
        3: build_noncontiguous_partition(graph, [3], 1, seed * 10 + 3),
    }
    partitions = [seasonal[s % 4] for s in range(n_seasons)]
    theta = [np.asarray(_SIM3_THETA[s % 4], dtype=float) for s in range(n_seasons)]
    return ScenarioSpec(
        name="sim3-noncontiguous",
        graph=graph,
        partitions=partitions,
        theta=theta,
        beta=_BETA.copy(),
        delta=_DELTA_SIM23.copy(),
        overdispersed=True,
        weeks_per_season=weeks_per_season,
    )


def builtin_scenarios(graph: SpatialGraph | None = None) -> dict[str, ScenarioSpec]:
    """Catalog of the shipped simulation scenarios."""
    graph = graph if graph is not None else grid_graph(7, 10)
    catalog: dict[str, ScenarioSpec] = {}
    for sce in (1, 2, 3):
        for kind in (False, True):
            spec = sim1_scenario(sce, kind, graph=graph)
            catalog[spec.name] = spec
    for sce in (1, 2, 3, 4):
        spec = sim2_scenario(sce, graph=graph)
        catalog[spec.name] = spec
    spec = sim3_scenario(graph=graph)
    catalog[spec.name] = spec
    return catalog
