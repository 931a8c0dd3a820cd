"""Spanning-tree product-partition prior and the latent chain driving it.

Edge-removal probabilities follow a hierarchy of beta variables linked by
exchangeable integer latents (u, c) of autoregressive order q, which keeps
every seasonal probability marginally Beta(upsilon, kappa) while inducing
autocorrelation across seasons.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import ValidationError
from .graph import Partition, SpatialGraph, SpanningTree, is_compatible, prim_mst

# Distinguished log-probability sentinel for impossible configurations.
# Callers must branch on `is_log_zero` before doing arithmetic with a
# log-probability; the sentinel never enters sums or differences.
LOG_ZERO = -math.inf


def is_log_zero(value: float) -> bool:
    return value == LOG_ZERO


@dataclass(frozen=True)
class PartitionPriorHyper:
    """Gamma hyperparameters for (upsilon, kappa, zeta) plus the order q.

    q = 0 with the latents frozen at zero encodes the independent-partitions
    special case.
    """

    a_upsilon: float = 10.0
    b_upsilon: float = 1.0
    a_kappa: float = 100.0
    b_kappa: float = 1.0
    a_zeta: float = 1.0
    b_zeta: float = 1.0
    q: int = 1

    def __post_init__(self):
        for name in ("a_upsilon", "b_upsilon", "a_kappa", "b_kappa", "a_zeta", "b_zeta"):
            if getattr(self, name) <= 0:
                raise ValidationError(f"{name} must be strictly positive")
        if self.q < 0:
            raise ValidationError("q must be >= 0")


@dataclass
class LatentSeries:
    """Latent state for seasons 1..S+q (the q extra slots extend the horizon).

    Entries at seasons s <= 0 are implicitly zero; array index s-1 holds
    season s. u[s] <= c[s] always.
    """

    n_seasons: int
    q: int
    rho: np.ndarray
    u: np.ndarray
    c: np.ndarray
    w: float
    zeta: float
    upsilon: float
    kappa: float

    def __post_init__(self):
        total = self.n_seasons + self.q
        for name in ("rho", "u", "c"):
            arr = getattr(self, name)
            if arr.shape != (total,):
                raise ValidationError(f"{name} must have length S+q = {total}")
        if np.any(self.u > self.c) or np.any(self.u < 0):
            raise ValidationError("latents must satisfy 0 <= u_s <= c_s")
        if np.any((self.rho <= 0) | (self.rho >= 1)):
            raise ValidationError("rho entries must lie in (0, 1)")

    @property
    def total_seasons(self) -> int:
        return self.n_seasons + self.q


def window_sum(values: np.ndarray, season: int, q: int) -> float:
    """Sum of values over seasons season-q..season, zero below season 1."""
    lo = max(season - q, 1)
    if lo > season:
        return 0.0
    return float(values[lo - 1 : season].sum())


def log_partition_prior(partition: Partition, tree: SpanningTree, rho_s: float) -> float:
    """Log prior mass of a partition given its tree and edge-removal probability.

    rho^(k-1) (1-rho)^(n-k) when the pair is compatible, LOG_ZERO otherwise.
    """
    if not (0.0 < rho_s < 1.0):
        raise ValidationError("rho_s must lie strictly inside (0, 1)")
    if not is_compatible(tree, partition):
        return LOG_ZERO
    n = partition.n_areas
    k = partition.k
    return (k - 1) * math.log(rho_s) + (n - k) * math.log1p(-rho_s)


def cluster_count_prior_moments(n: int, upsilon: float, kappa: float) -> tuple[float, float]:
    """Prior mean and variance of the per-season cluster count.

    k-1 is beta-binomial over the n-1 tree edges, giving closed forms useful
    for elicitation.
    """
    if n < 1 or upsilon <= 0 or kappa <= 0:
        raise ValidationError("need n >= 1 and positive upsilon, kappa")
    total = upsilon + kappa
    mean = (n - 1) * upsilon / total + 1.0
    var = (n - 1) * upsilon * kappa * (total + n - 1) / (total**2 * (total + 1))
    return mean, var


def cluster_count_prior_pmf(n: int, upsilon: float, kappa: float) -> np.ndarray:
    """P[K = k] for k = 1..n: BeBin(n-1, upsilon, kappa) shifted by one."""
    from scipy.stats import betabinom

    return betabinom.pmf(np.arange(n), n - 1, upsilon, kappa)


def rho_autocorrelation(
    s: int, l: int, q: int, upsilon: float, kappa: float, c
) -> float:
    """Closed-form corr(rho_s, rho_(s+l)) given the latent totals c.

    c maps season index (1-based) to the latent count; seasons <= 0 contribute
    zero. The shared-window sum is empty when l > q, which is the convention
    for lags beyond the autoregressive order.
    """
    if s < 1 or l < 1:
        raise ValidationError("need s >= 1 and l >= 1")
    c = np.asarray(c, dtype=float)
    if np.any(c < 0):
        raise ValidationError("c entries must be non-negative")

    def c_at(season: int) -> float:
        if season < 1:
            return 0.0
        if season > c.size:
            raise ValidationError(f"c must cover season {season} (got length {c.size})")
        return float(c[season - 1])

    total = upsilon + kappa
    shared = sum(c_at(s - h) for h in range(0, q - l + 1)) if l <= q else 0.0
    sum_s = sum(c_at(s - h) for h in range(0, q + 1))
    sum_sl = sum(c_at(s + l - h) for h in range(0, q + 1))
    num = total * shared + sum_s * sum_sl
    den = (total + sum_s) * (total + sum_sl)
    return num / den


def sample_prior_latents(
    hyper: PartitionPriorHyper,
    n_seasons: int,
    rng: np.random.Generator,
    upsilon: float | None = None,
    kappa: float | None = None,
    zeta: float | None = None,
) -> LatentSeries:
    """Hierarchical prior draw of the full latent series over S+q seasons.

    Passing upsilon/kappa/zeta pins those values instead of drawing them from
    their gamma priors (useful for elicitation and calibration checks).
    """
    if n_seasons < 1:
        raise ValidationError("need n_seasons >= 1")
    ups = rng.gamma(hyper.a_upsilon, 1.0 / hyper.b_upsilon) if upsilon is None else float(upsilon)
    kap = rng.gamma(hyper.a_kappa, 1.0 / hyper.b_kappa) if kappa is None else float(kappa)
    zet = rng.gamma(hyper.a_zeta, 1.0 / hyper.b_zeta) if zeta is None else float(zeta)
    w = float(rng.beta(ups, kap))
    total = n_seasons + hyper.q
    c = rng.poisson(zet, size=total).astype(np.int64)
    u = rng.binomial(c, w).astype(np.int64)
    rho = np.empty(total)
    for s in range(1, total + 1):
        a = ups + window_sum(u, s, hyper.q)
        b = kap + window_sum(c, s, hyper.q) - window_sum(u, s, hyper.q)
        rho[s - 1] = rng.beta(a, b)
    return LatentSeries(
        n_seasons=n_seasons, q=hyper.q, rho=rho, u=u, c=c, w=w, zeta=zet, upsilon=ups, kappa=kap
    )


def sample_tree(graph: SpatialGraph, rng: np.random.Generator) -> SpanningTree:
    """Random spanning tree via Prim over iid Uniform(0,1) weights.

    Stands in for the uniform-over-trees prior; the sampler only needs
    support over all trees compatible with a partition, not exact uniformity.
    """
    return prim_mst(graph, rng.random(graph.n_edges))


def prune_tree(tree: SpanningTree, rho: float, rng: np.random.Generator) -> Partition:
    """Remove each tree edge independently with probability rho."""
    from .graph import partition_from_indicators

    bits = (rng.random(tree.graph.n_areas - 1) >= rho).astype(np.uint8)
    return partition_from_indicators(tree, bits)


def prior_predictive_partitions(
    hyper: PartitionPriorHyper,
    graph: SpatialGraph,
    n_seasons: int,
    n_draws: int,
    rng: np.random.Generator,
    upsilon: float | None = None,
    kappa: float | None = None,
    zeta: float | None = None,
    rho: float | None = None,
) -> list[list[Partition]]:
    """Prior-predictive sampled partitions, one list of seasons per draw.

    Each draw samples latents (with optional pinned values), a fresh tree per
    season, and prunes edges independently with that season's probability.
    """
    draws: list[list[Partition]] = []
    for _ in range(n_draws):
        if rho is None:
            latents = sample_prior_latents(
                hyper, n_seasons, rng, upsilon=upsilon, kappa=kappa, zeta=zeta
            )
            rhos = latents.rho[:n_seasons]
        else:
            rhos = np.full(n_seasons, float(rho))
        seasons = []
        for s in range(n_seasons):
            tree = sample_tree(graph, rng)
            if rhos[s] <= 0.0:
                seasons.append(Partition.single_cluster(graph.n_areas))
            elif rhos[s] >= 1.0:
                seasons.append(Partition.from_labels(np.arange(graph.n_areas)))
            else:
                seasons.append(prune_tree(tree, float(rhos[s]), rng))
        draws.append(seasons)
    return draws


def elicitation_grid(n: int, upsilons, kappas) -> list[dict]:
    """Cluster-count prior mean/variance over a grid of (upsilon, kappa)."""
    rows = []
    for kap in kappas:
        for ups in upsilons:
            mean, var = cluster_count_prior_moments(n, ups, kap)
            rows.append(
                {
                    "upsilon": float(ups),
                    "kappa": float(kap),
                    "mean_clusters": mean,
                    "var_clusters": var,
                }
            )
    return rows
