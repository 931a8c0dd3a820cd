"""Posterior summaries: WAIC, partition point estimates, Rand indices, dispersion.

The point-estimate search optimizes expected posterior loss over candidate
partitions: every distinct sampled partition is a candidate, plus greedy
label-swap refinements started from random draws, so the reported optimum is
never worse than any single draw.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import ValidationError
from .graph import Partition
from .mcmc import SampleStore

_LOG2 = math.log(2.0)


def waic(pointwise_loglik: np.ndarray) -> float:
    """Widely applicable information criterion on the deviance scale.

    lppd sums log posterior-mean pointwise densities; the effective-parameter
    penalty sums pointwise variances of the log densities. Lower is better.
    """
    ll = np.asarray(pointwise_loglik, dtype=float)
    if ll.ndim != 2 or ll.shape[0] < 2:
        raise ValidationError("waic needs a (draws >= 2) x observations matrix")
    m = ll.max(axis=0)
    lppd = float(np.sum(m + np.log(np.mean(np.exp(ll - m), axis=0))))
    p_waic = float(np.sum(ll.var(axis=0, ddof=1)))
    return -2.0 * (lppd - p_waic)


def _contingency(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    ka, kb = int(a.max()) + 1, int(b.max()) + 1
    return np.bincount(a * kb + b, minlength=ka * kb).reshape(ka, kb).astype(float)


def rand_index(p1: Partition | np.ndarray, p2: Partition | np.ndarray) -> float:
    """Fraction of area pairs on which the two partitions agree."""
    a = p1.labels if isinstance(p1, Partition) else np.asarray(p1, dtype=np.int64)
    b = p2.labels if isinstance(p2, Partition) else np.asarray(p2, dtype=np.int64)
    if a.shape != b.shape:
        raise ValidationError("partitions must cover the same areas")
    n = a.size
    if n < 2:
        raise ValidationError("rand index needs at least two areas")
    cont = _contingency(a, b)
    pairs = n * (n - 1) / 2.0
    same_both = (cont * (cont - 1) / 2.0).sum()
    same_a = (cont.sum(axis=1) * (cont.sum(axis=1) - 1) / 2.0).sum()
    same_b = (cont.sum(axis=0) * (cont.sum(axis=0) - 1) / 2.0).sum()
    agreements = pairs + 2.0 * same_both - same_a - same_b
    return float(agreements / pairs)


def adjusted_rand_index(p1: Partition | np.ndarray, p2: Partition | np.ndarray) -> float:
    """Chance-corrected pair agreement; 0 for independent partitions, 1 for equal."""
    a = p1.labels if isinstance(p1, Partition) else np.asarray(p1, dtype=np.int64)
    b = p2.labels if isinstance(p2, Partition) else np.asarray(p2, dtype=np.int64)
    if a.shape != b.shape:
        raise ValidationError("partitions must cover the same areas")
    n = a.size
    if n < 2:
        raise ValidationError("adjusted rand index needs at least two areas")
    cont = _contingency(a, b)
    sum_ij = (cont * (cont - 1) / 2.0).sum()
    sum_a = (cont.sum(axis=1) * (cont.sum(axis=1) - 1) / 2.0).sum()
    sum_b = (cont.sum(axis=0) * (cont.sum(axis=0) - 1) / 2.0).sum()
    pairs = n * (n - 1) / 2.0
    expected = sum_a * sum_b / pairs
    max_index = 0.5 * (sum_a + sum_b)
    if max_index == expected:
        return 1.0 if sum_ij == expected else 0.0
    return float((sum_ij - expected) / (max_index - expected))


def variation_of_information(a: np.ndarray, b: np.ndarray) -> float:
    """VI distance between two labelings, in bits."""
    a = np.asarray(a, dtype=np.int64)
    b = np.asarray(b, dtype=np.int64)
    n = a.size
    cont = _contingency(a, b) / n
    pa = cont.sum(axis=1)
    pb = cont.sum(axis=0)
    nz = cont > 0
    h_joint = -float((cont[nz] * np.log(cont[nz])).sum()) / _LOG2
    h_a = -float((pa[pa > 0] * np.log(pa[pa > 0])).sum()) / _LOG2
    h_b = -float((pb[pb > 0] * np.log(pb[pb > 0])).sum()) / _LOG2
    return 2.0 * h_joint - h_a - h_b


def _coclustering(draws: np.ndarray) -> np.ndarray:
    d, n = draws.shape
    prob = np.zeros((n, n))
    for row in draws:
        prob += row[:, None] == row[None, :]
    return prob / d


def _expected_binder(labels: np.ndarray, prob: np.ndarray) -> float:
    same = labels[:, None] == labels[None, :]
    iu = np.triu_indices(labels.size, k=1)
    p = prob[iu]
    return float(np.where(same[iu], 1.0 - p, p).sum())


def _vi_lower_bound(labels: np.ndarray, prob: np.ndarray) -> float:
    # Jensen lower bound of expected VI; constant terms in the draws dropped
    same = (labels[:, None] == labels[None, :]).astype(float)
    sizes = same.sum(axis=1)
    inner = (same * prob).sum(axis=1)
    return float((np.log2(sizes) - 2.0 * np.log2(np.maximum(inner, 1e-300))).sum())


def _greedy_search(start: np.ndarray, prob: np.ndarray, objective, max_sweeps: int = 25):
    labels = Partition.from_labels(start).labels.copy()
    n = labels.size
    best = objective(labels, prob)
    for _ in range(max_sweeps):
        improved = False
        for i in range(n):
            current = labels[i]
            options = set(labels.tolist())
            options.add(int(labels.max()) + 1)  # allow opening a new cluster
            options.discard(int(current))
            for cand in options:
                labels[i] = cand
                trial_labels = Partition.from_labels(labels).labels
                val = objective(trial_labels, prob)
                if val < best - 1e-12:
                    best = val
                    labels = trial_labels.copy()
                    improved = True
                    break
                labels[i] = current
        if not improved:
            break
    return Partition.from_labels(labels).labels, best


def point_estimate_partition(
    partition_draws: np.ndarray,
    loss: str = "vi",
    restarts: int = 4,
    rng: np.random.Generator | None = None,
) -> Partition:
    """Partition minimizing expected posterior loss against the draw set.

    loss is "vi" (variation of information, greedy over its Jensen surrogate
    with exact VI scoring of candidates) or "binder" (exact pairwise form).
    Deterministic given the rng seed.
    """
    draws = np.asarray(partition_draws, dtype=np.int64)
    if draws.ndim != 2 or draws.shape[0] < 1:
        raise ValidationError("need a (draws, areas) label matrix")
    if loss not in ("vi", "binder"):
        raise ValidationError("loss must be 'vi' or 'binder'")
    rng = rng or np.random.default_rng(0)
    uniq, counts = np.unique(draws, axis=0, return_counts=True)
    weights = counts / counts.sum()
    prob = _coclustering(draws)

    def exact_expected_loss(labels: np.ndarray) -> float:
        if loss == "binder":
            return _expected_binder(labels, prob)
        return float(
            sum(w * variation_of_information(labels, u) for u, w in zip(uniq, weights))
        )

    surrogate = _vi_lower_bound if loss == "vi" else _expected_binder
    candidates = [Partition.from_labels(u).labels for u in uniq]
    for _ in range(restarts):
        start = uniq[rng.integers(uniq.shape[0])]
        labels, _ = _greedy_search(start, prob, surrogate)
        candidates.append(labels)
    scores = [exact_expected_loss(c) for c in candidates]
    return Partition.from_labels(candidates[int(np.argmin(scores))])


def credible_interval(draws: np.ndarray, level: float = 0.95, axis: int = 0):
    """Equal-tailed sample-quantile interval (type-7 interpolation)."""
    alpha = (1.0 - level) / 2.0
    lo = np.quantile(draws, alpha, axis=axis)
    hi = np.quantile(draws, 1.0 - alpha, axis=axis)
    return lo, hi


def dispersion_indicators(z_draws: np.ndarray, level: float = 0.95) -> np.ndarray:
    """True where the equal-tailed interval of z excludes 1 (overdispersion signal)."""
    lo, hi = credible_interval(np.asarray(z_draws, dtype=float), level=level, axis=0)
    return (lo > 1.0) | (hi < 1.0)


def mean_variance_ratio(lambda_draws: np.ndarray, psi_draws: np.ndarray, offset) -> np.ndarray:
    """Posterior mean of E/V = O*lam / (O*lam + (O*lam)^2 / psi) per observation."""
    m = np.asarray(offset) * np.asarray(lambda_draws, dtype=float)
    ratio = 1.0 / (1.0 + m / np.asarray(psi_draws, dtype=float))
    return ratio.mean(axis=0)


def lagged_ri_matrix(point_estimates: list[Partition | np.ndarray]) -> np.ndarray:
    """Symmetric matrix of pairwise Rand indices across seasons, unit diagonal."""
    S = len(point_estimates)
    out = np.eye(S)
    for i in range(S):
        for j in range(i + 1, S):
            out[i, j] = out[j, i] = rand_index(point_estimates[i], point_estimates[j])
    return out


@dataclass
class PosteriorSummary:
    """Scalar and seasonal posterior summaries of one chain."""

    scalars: dict  # name -> {mean, sd, lo, hi}
    rho: dict  # per season arrays: mean, lo, hi
    k: dict
    point_partitions: list[Partition]
    waic_marginal: float
    waic_conditional: float
    ri_matrix: np.ndarray
    dispersion_flags: np.ndarray  # (n, S)
    accept_rates: dict


def _scalar_summary(draws: np.ndarray, level: float) -> dict:
    lo, hi = credible_interval(draws, level)
    return {
        "mean": float(np.mean(draws)),
        "sd": float(np.std(draws, ddof=1)),
        "lo": float(lo),
        "hi": float(hi),
    }


def summarize_store(
    store: SampleStore,
    level: float = 0.95,
    loss: str = "vi",
    restarts: int = 4,
    seed: int = 0,
) -> PosteriorSummary:
    """Turn raw draws into the reporting quantities used downstream."""
    scalars = {
        "upsilon": _scalar_summary(store.upsilon, level),
        "kappa": _scalar_summary(store.kappa, level),
        "zeta": _scalar_summary(store.zeta, level),
        "w": _scalar_summary(store.w, level),
    }
    for j in range(store.beta.shape[1]):
        scalars[f"beta_{j + 1}"] = _scalar_summary(store.beta[:, j], level)
    for j in range(store.delta.shape[1]):
        scalars[f"delta_{j}"] = _scalar_summary(store.delta[:, j], level)
    rho_lo, rho_hi = credible_interval(store.rho, level)
    k_lo, k_hi = credible_interval(store.k.astype(float), level)
    n_seasons = store.labels.shape[1]
    rng = np.random.default_rng(seed)
    points = [
        point_estimate_partition(store.labels[:, s, :], loss=loss, restarts=restarts, rng=rng)
        for s in range(n_seasons)
    ]
    flags = dispersion_indicators(store.z, level)  # (n, S) after transpose below
    return PosteriorSummary(
        scalars=scalars,
        rho={"mean": store.rho.mean(axis=0), "lo": rho_lo, "hi": rho_hi},
        k={"mean": store.k.mean(axis=0), "lo": k_lo, "hi": k_hi},
        point_partitions=points,
        waic_marginal=waic(store.loglik_marginal) if store.n_draws >= 2 else float("nan"),
        waic_conditional=waic(store.loglik_conditional) if store.n_draws >= 2 else float("nan"),
        ri_matrix=lagged_ri_matrix(points) if n_seasons else np.zeros((0, 0)),
        dispersion_flags=flags.T,
        accept_rates=dict(store.accept_rates),
    )
