"""Poisson-inverse-Gaussian observation model and collapsed cluster marginals.

Counts are conditionally Poisson with rate offset * lambda * z, where z is a
unit-mean inverse-Gaussian heterogeneity effect per (area, season).  The
marginal count law is then PIG(offset * lambda, psi) with variance
m + m^2/psi, and the cluster-level random intercept integrates out in closed
form against its gamma prior.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from functools import cached_property

import numpy as np
from scipy.special import gammaln

from .errors import ValidationError
from .partition_prior import LOG_ZERO


@dataclass(frozen=True)
class Dataset:
    """Areal count panel: weekly counts with per-season dispersion design.

    Arrays are indexed (area, week) for y, offset, X and (area, season) for V.
    The season map sends each week to its season; seasons must form contiguous
    week blocks covering 0..n_seasons-1.
    """

    y: np.ndarray  # (n, T) non-negative counts
    offset: np.ndarray  # (n, T) positive exposures
    X: np.ndarray  # (n, T, p1) mean design (p1 may be 0)
    V: np.ndarray  # (n, S, p2) dispersion design (p2 may be 0 in Poisson fits)
    season_of_week: np.ndarray  # (T,) ints in 0..S-1

    def __post_init__(self):
        y = np.asarray(self.y, dtype=np.int64)
        offset = np.asarray(self.offset, dtype=float)
        X = np.asarray(self.X, dtype=float)
        V = np.asarray(self.V, dtype=float)
        sow = np.asarray(self.season_of_week, dtype=np.int64)
        n, T = y.shape
        if offset.shape != (n, T):
            raise ValidationError("offset must match y's (area, week) shape")
        if X.ndim != 3 or X.shape[:2] != (n, T):
            raise ValidationError("X must have shape (n_areas, n_weeks, p1)")
        if sow.shape != (T,):
            raise ValidationError("season_of_week must have one entry per week")
        if np.any(y < 0):
            raise ValidationError("counts must be non-negative")
        if np.any(offset <= 0) or not np.all(np.isfinite(offset)):
            raise ValidationError("offsets must be positive and finite")
        if T > 0:
            S = int(sow.max()) + 1
            if sorted(set(sow.tolist())) != list(range(S)):
                raise ValidationError("season ids must cover 0..S-1")
            if np.any(np.diff(sow) < 0) or np.any(np.diff(sow) > 1):
                raise ValidationError("seasons must be contiguous week blocks in order")
        else:
            S = 0
        if V.ndim != 3 or V.shape[:2] != (n, S):
            raise ValidationError("V must have shape (n_areas, n_seasons, p2)")
        for name, arr in (("y", y), ("offset", offset), ("X", X), ("V", V), ("season_of_week", sow)):
            arr.flags.writeable = False
            object.__setattr__(self, name, arr)

    @property
    def n_areas(self) -> int:
        return self.y.shape[0]

    @property
    def n_weeks(self) -> int:
        return self.y.shape[1]

    @property
    def n_seasons(self) -> int:
        return self.V.shape[1]

    @property
    def p_mean(self) -> int:
        return self.X.shape[2]

    @property
    def p_disp(self) -> int:
        return self.V.shape[2]

    @cached_property
    def weeks_of_season(self) -> list[np.ndarray]:
        return [np.flatnonzero(self.season_of_week == s) for s in range(self.n_seasons)]

    @cached_property
    def ysum_area_season(self) -> np.ndarray:
        """Sum of counts per (area, season)."""
        out = np.zeros((self.n_areas, self.n_seasons))
        for s, weeks in enumerate(self.weeks_of_season):
            out[:, s] = self.y[:, weeks].sum(axis=1)
        return out


def linear_predictor_mean(dataset: Dataset, beta: np.ndarray) -> np.ndarray:
    """exp(X beta) per (area, week); all ones when there are no covariates."""
    beta = np.asarray(beta, dtype=float)
    if beta.size == 0:
        return np.ones((dataset.n_areas, dataset.n_weeks))
    return np.exp(dataset.X @ beta)


def mean_rate(i: int, t: int, dataset: Dataset, beta, theta_area_season: np.ndarray) -> float:
    """lambda_it = exp(X_it' beta) * theta for the cluster of area i in week t's season.

    theta_area_season holds the cluster-level intercept already expanded per
    (area, season). The full Poisson rate is offset * lambda * z.
    """
    s = int(dataset.season_of_week[t])
    beta = np.asarray(beta, dtype=float)
    xb = float(dataset.X[i, t] @ beta) if beta.size else 0.0
    return float(np.exp(xb) * theta_area_season[i, s])


def dispersion_param(i: int, s: int, dataset: Dataset, delta) -> float:
    """psi_is = exp(V_is' delta) > 0."""
    delta = np.asarray(delta, dtype=float)
    if delta.size == 0:
        return 1.0
    return float(np.exp(dataset.V[i, s] @ delta))


def psi_matrix(dataset: Dataset, delta) -> np.ndarray:
    delta = np.asarray(delta, dtype=float)
    if delta.size == 0:
        return np.ones((dataset.n_areas, dataset.n_seasons))
    return np.exp(dataset.V @ delta)


def _stable_psi_minus_omega(mu, psi):
    """psi - sqrt(psi*(2mu+psi)) without cancellation: -2*mu*psi/(psi+omega)."""
    omega = np.sqrt(psi * (2.0 * mu + psi))
    return -2.0 * mu * psi / (psi + omega), omega


def pig_log_pmf(y: int, mu: float, psi: float) -> float:
    """Log pmf of the Poisson-inverse-Gaussian law at y.

    Uses the closed finite-sum form of the modified Bessel function of
    half-integer order y - 1/2, evaluated with a log-sum-exp, so the value is
    finite across the whole supported range without special-function calls.
    """
    if y < 0 or int(y) != y:
        raise ValidationError("y must be a non-negative integer")
    if mu <= 0 or psi <= 0:
        raise ValidationError("mu and psi must be positive")
    y = int(y)
    alpha = 2.0 * mu + psi
    base, omega = _stable_psi_minus_omega(mu, psi)
    if y == 0:
        return float(base)
    # K_{y-1/2}(omega) = sqrt(pi/(2 omega)) e^{-omega} sum_i (n+i)!/(i!(n-i)!) (2 omega)^{-i}
    n = y - 1
    i = np.arange(n + 1)
    terms = gammaln(n + i + 1) - gammaln(i + 1) - gammaln(n - i + 1) - i * np.log(2.0 * omega)
    m = terms.max()
    log_bessel_sum = m + np.log(np.exp(terms - m).sum())
    return float(
        y * np.log(mu)
        - gammaln(y + 1)
        + 0.5 * (np.log(psi) - np.log(2.0 * np.pi))
        + np.log(2.0)
        + ((2.0 * y - 1.0) / 4.0) * (np.log(psi) - np.log(alpha))
        + 0.5 * (np.log(np.pi) - np.log(2.0) - np.log(omega))
        + base
        + log_bessel_sum
    )


def pig_log_pmf_array(y: np.ndarray, mu: np.ndarray, psi: np.ndarray) -> np.ndarray:
    """Vectorized PIG log pmf over flat arrays of equal length.

    Entries are sorted by descending count so the stable two-term log-space
    recurrence only advances the observations that still need it; total cost
    is O(sum(y)) rather than O(max(y) * len(y)).
    """
    y = np.asarray(y, dtype=np.int64).ravel()
    mu = np.asarray(mu, dtype=float).ravel()
    psi = np.asarray(psi, dtype=float).ravel()
    if not (y.shape == mu.shape == psi.shape):
        raise ValidationError("y, mu, psi must have equal lengths")
    if np.any(mu <= 0) or np.any(psi <= 0):
        raise ValidationError("mu and psi must be positive")
    out = np.empty(y.shape)
    if y.size == 0:
        return out
    order = np.argsort(-y, kind="stable")
    ys = y[order]
    log_mu = np.log(mu[order])
    log_alpha = np.log(2.0 * mu[order] + psi[order])
    log_psi = np.log(psi[order])
    l0, _ = _stable_psi_minus_omega(mu[order], psi[order])
    l1 = log_mu + 0.5 * (log_psi - log_alpha) + l0
    sorted_out = np.empty_like(l0)
    sorted_out[ys == 0] = l0[ys == 0]
    sorted_out[ys == 1] = l1[ys == 1]
    ymax = int(ys[0])
    if ymax >= 2:
        # still_needed[v] = number of entries with count >= v (a prefix, since sorted)
        hist = np.bincount(ys, minlength=ymax + 2)
        still_needed = np.cumsum(hist[::-1])[::-1]
        prev2, prev = l0.copy(), l1.copy()
        for yy in range(2, ymax + 1):
            m = int(still_needed[yy])
            la = math.log(2.0 * yy - 3.0) - math.log(yy)
            lb = -math.log(yy * (yy - 1.0))
            cur = np.logaddexp(
                la + log_mu[:m] - log_alpha[:m] + prev[:m],
                lb + 2.0 * log_mu[:m] + log_psi[:m] - log_alpha[:m] + prev2[:m],
            )
            lo = int(still_needed[yy + 1])
            if lo < m:
                sorted_out[lo:m] = cur[lo:m]
            prev2[:m] = prev[:m]
            prev[:m] = cur
    out[order] = sorted_out
    return out


def collapsed_cluster_marginal(
    cluster_members,
    season: int,
    dataset: Dataset,
    beta,
    z: np.ndarray,
    a_theta: float,
    b_theta: float,
) -> float:
    """Log normalizing constant from integrating the cluster intercept out.

    log Gamma(a + sum y) - (a + sum y) * log(b + sum_i z_is * sum_t O_it e^{X'beta}),
    with sums over the cluster's areas and the season's weeks.
    """
    members = np.asarray(cluster_members, dtype=np.int64)
    if members.size == 0:
        raise ValidationError("cluster must be non-empty")
    weeks = dataset.weeks_of_season[season]
    lam0 = linear_predictor_mean(dataset, beta)
    ysum = float(dataset.y[np.ix_(members, weeks)].sum())
    exposure = float(
        (z[members, season] * (dataset.offset[np.ix_(members, weeks)] * lam0[np.ix_(members, weeks)]).sum(axis=1)).sum()
    )
    return cluster_marginal_from_sums(ysum, exposure, a_theta, b_theta)


def cluster_marginal_from_sums(ysum: float, exposure: float, a_theta: float, b_theta: float) -> float:
    return float(gammaln(a_theta + ysum) - (a_theta + ysum) * np.log(b_theta + exposure))


def conditional_poisson_loglik(
    dataset: Dataset, theta_area_season: np.ndarray, z: np.ndarray, beta
) -> np.ndarray:
    """Pointwise log Poisson mass at each (area, week) under rate O*lambda*z."""
    lam = linear_predictor_mean(dataset, beta) * theta_area_season[:, dataset.season_of_week]
    rate = dataset.offset * lam * z[:, dataset.season_of_week]
    out = np.full(rate.shape, LOG_ZERO)
    pos = rate > 0
    out[pos] = dataset.y[pos] * np.log(rate[pos]) - rate[pos] - gammaln(dataset.y[pos] + 1)
    out[(~pos) & (dataset.y == 0)] = 0.0
    return out


def marginal_pig_loglik(
    dataset: Dataset, theta_area_season: np.ndarray, beta, psi: np.ndarray
) -> np.ndarray:
    """Pointwise log PIG mass at each (area, week) with z integrated out."""
    lam = linear_predictor_mean(dataset, beta) * theta_area_season[:, dataset.season_of_week]
    mu = dataset.offset * lam
    psi_wk = psi[:, dataset.season_of_week]
    return pig_log_pmf_array(dataset.y.ravel(), mu.ravel(), psi_wk.ravel()).reshape(dataset.y.shape)


def compute_sir(y_totals, expected_totals) -> np.ndarray:
    """Standardized incidence ratio: observed over expected counts per area."""
    y_totals = np.asarray(y_totals, dtype=float)
    expected = np.asarray(expected_totals, dtype=float)
    if y_totals.shape != expected.shape:
        raise ValidationError("observed and expected totals must align")
    if np.any(expected <= 0):
        raise ValidationError("expected totals must be strictly positive")
    return y_totals / expected
