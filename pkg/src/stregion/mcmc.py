"""Metropolis-within-Gibbs sampler for the seasonal tree-partition model.

One sweep updates, in order: the latent-chain hyperparameters (upsilon, kappa,
zeta, w), then per data season the tree, partition, integer latents, removal
probability, cluster intercepts, and heterogeneity effects, then the q extra
horizon seasons of latents that the autoregressive window needs, and finally
the regression blocks beta and delta.

The partition step is partially collapsed: both the cluster intercepts and the
removal probability are integrated out of the per-edge keep/remove ratio, and
both are refreshed from their full conditionals afterwards.  All ratio
computations run in log space.
"""
from __future__ import annotations

import math
import time
from dataclasses import dataclass

import numpy as np
from scipy.special import gammaln

from .errors import InvariantError, ValidationError
from .gig import sample_gig
from .graph import (
    Partition,
    SpatialGraph,
    SpanningTree,
    indicators_from_partition,
    partition_from_indicators,
    sample_compatible_tree,
)
from .likelihood import (
    Dataset,
    conditional_poisson_loglik,
    linear_predictor_mean,
    marginal_pig_loglik,
    psi_matrix,
)
from .partition_prior import LOG_ZERO, window_sum

_RHO_EPS = 1e-12
_W_EPS = 1e-12


def _as_vector(value, length: int, name: str) -> np.ndarray:
    arr = np.asarray(value, dtype=float)
    if arr.ndim == 0:
        return np.full(length, float(arr))
    if arr.shape != (length,):
        raise ValidationError(f"{name} must be a scalar or length-{length} vector")
    return arr.copy()


@dataclass(frozen=True)
class SamplerConfig:
    """Chain length, model flags, hyperparameters, and proposal scales."""

    n_iter: int = 10_000
    burn_in: float = 0.7
    thin: int = 3
    q: int = 1
    seed: int = 0
    likelihood: str = "pig"  # "pig" or "poisson"
    independence: bool = False  # freeze u = c = 0 (iid partitions; requires q = 0)

    mu_beta: float | np.ndarray = 0.0
    sigma_beta: float | np.ndarray = 10.0  # prior variance (diagonal)
    mu_delta: float | np.ndarray = 0.0
    sigma_delta: float | np.ndarray = 10.0
    a_theta: float = 1.0
    b_theta: float = 1.0
    a_upsilon: float = 10.0
    b_upsilon: float = 1.0
    a_kappa: float = 100.0
    b_kappa: float = 1.0
    a_zeta: float = 1.0
    b_zeta: float = 1.0
    fix_upsilon: float | None = None
    fix_kappa: float | None = None

    scale_beta: float = 0.05
    scale_delta: float = 0.2
    scale_upsilon: float = 0.3
    scale_kappa: float = 0.3
    adapt: bool = True
    adapt_window: int = 50
    target_accept: float = 0.3

    def __post_init__(self):
        if self.n_iter < 1:
            raise ValidationError("n_iter must be >= 1")
        if not (0.0 <= self.burn_in < 1.0):
            raise ValidationError("burn_in must lie in [0, 1)")
        if self.thin < 1:
            raise ValidationError("thin must be >= 1")
        if self.q < 0:
            raise ValidationError("q must be >= 0")
        if self.likelihood not in ("pig", "poisson"):
            raise ValidationError("likelihood must be 'pig' or 'poisson'")
        if self.independence and self.q != 0:
            raise ValidationError("independence mode encodes iid partitions; set q = 0")
        for name in (
            "a_theta", "b_theta", "a_upsilon", "b_upsilon", "a_kappa", "b_kappa",
            "a_zeta", "b_zeta", "scale_beta", "scale_delta", "scale_upsilon", "scale_kappa",
        ):
            if getattr(self, name) <= 0:
                raise ValidationError(f"{name} must be strictly positive")
        if self.n_draws < 1:
            raise ValidationError("no draws retained; increase n_iter or lower burn_in/thin")

    @property
    def n_draws(self) -> int:
        return int(math.floor(self.n_iter * (1.0 - self.burn_in) / self.thin))


@dataclass
class ChainState:
    """Mutable snapshot of every parameter touched by one sweep.

    Seasonal lists cover data seasons 1..S plus the q horizon seasons; season s
    lives at index s-1.  Every (tree, partition) pair stays compatible.
    """

    trees: list[SpanningTree]
    bits: list[np.ndarray]
    labels: list[np.ndarray]
    k: np.ndarray
    theta: list[np.ndarray]  # data seasons only, ragged per k_s
    theta_area: np.ndarray  # (n, S) intercept expanded per area
    z: np.ndarray  # (n, S)
    beta: np.ndarray
    delta: np.ndarray
    rho: np.ndarray  # (S+q,)
    u: np.ndarray  # (S+q,) int
    c: np.ndarray  # (S+q,) int
    w: float
    zeta: float
    upsilon: float
    kappa: float

    def summary_dump(self) -> dict:
        return {
            "k": self.k.tolist(),
            "rho": self.rho.tolist(),
            "u": self.u.tolist(),
            "c": self.c.tolist(),
            "w": self.w,
            "zeta": self.zeta,
            "upsilon": self.upsilon,
            "kappa": self.kappa,
            "beta": self.beta.tolist(),
            "delta": self.delta.tolist(),
        }


@dataclass
class SampleStore:
    """Thinned post-burn-in draws plus pointwise log-likelihoods."""

    config: SamplerConfig
    n_draws: int
    upsilon: np.ndarray
    kappa: np.ndarray
    zeta: np.ndarray
    w: np.ndarray
    beta: np.ndarray  # (D, p1)
    delta: np.ndarray  # (D, p2)
    rho: np.ndarray  # (D, S+q)
    u: np.ndarray
    c: np.ndarray
    k: np.ndarray  # (D, S+q)
    labels: np.ndarray  # (D, S, n)
    theta_area: np.ndarray  # (D, S, n)
    z: np.ndarray  # (D, S, n)
    loglik_marginal: np.ndarray  # (D, n*T), obs index = area * n_weeks + week
    loglik_conditional: np.ndarray
    accept_rates: dict
    proposal_scales: dict
    wall_time: float


# ---------------------------------------------------------------------------
# Log full conditionals for the Metropolis blocks
# ---------------------------------------------------------------------------

def log_target_upsilon(
    ups: float, kappa: float, w: float, rho: np.ndarray, u: np.ndarray, c: np.ndarray,
    n_data_seasons: int, q: int, a_upsilon: float, b_upsilon: float,
) -> float:
    if ups <= 0:
        return LOG_ZERO
    total = gammaln(ups + kappa) - gammaln(ups)
    log_rho_sum = math.log(w)
    for s in range(1, n_data_seasons + 1):
        cs = window_sum(c, s, q)
        us = window_sum(u, s, q)
        total += gammaln(ups + kappa + cs) - gammaln(ups + us)
        log_rho_sum += math.log(rho[s - 1])
    return total + ups * log_rho_sum + (a_upsilon - 1.0) * math.log(ups) - b_upsilon * ups


def log_target_kappa(
    kap: float, upsilon: float, w: float, rho: np.ndarray, u: np.ndarray, c: np.ndarray,
    n_data_seasons: int, q: int, a_kappa: float, b_kappa: float,
) -> float:
    if kap <= 0:
        return LOG_ZERO
    total = gammaln(upsilon + kap) - gammaln(kap)
    log_1mrho_sum = math.log1p(-w)
    for s in range(1, n_data_seasons + 1):
        cs = window_sum(c, s, q)
        us = window_sum(u, s, q)
        total += gammaln(upsilon + kap + cs) - gammaln(kap + cs - us)
        log_1mrho_sum += math.log1p(-rho[s - 1])
    return total + kap * log_1mrho_sum + (a_kappa - 1.0) * math.log(kap) - b_kappa * kap


def _forward_window(s: int, q: int, total_seasons: int) -> range:
    """Offsets h of the seasons whose removal-probability law involves season s."""
    return range(0, min(q, total_seasons - s) + 1)


def log_target_c(
    value: int, s: int, u: np.ndarray, c: np.ndarray, rho: np.ndarray,
    w: float, zeta: float, upsilon: float, kappa: float, q: int, total_seasons: int,
) -> float:
    if value < u[s - 1] or value < 0:
        return LOG_ZERO
    c_mod = c.copy()
    c_mod[s - 1] = value
    total = -gammaln(value - u[s - 1] + 1.0)
    log_rate = math.log(zeta) + math.log1p(-w)
    for h in _forward_window(s, q, total_seasons):
        cs = window_sum(c_mod, s + h, q)
        us = window_sum(u, s + h, q)
        total += gammaln(upsilon + kappa + cs) - gammaln(kappa + cs - us)
        log_rate += math.log1p(-rho[s + h - 1])
    return total + value * log_rate


def log_target_u(
    value: int, s: int, u: np.ndarray, c: np.ndarray, rho: np.ndarray,
    w: float, upsilon: float, kappa: float, q: int, total_seasons: int,
) -> float:
    if value < 0 or value > c[s - 1]:
        return LOG_ZERO
    u_mod = u.copy()
    u_mod[s - 1] = value
    total = gammaln(c[s - 1] + 1.0) - gammaln(value + 1.0) - gammaln(c[s - 1] - value + 1.0)
    log_odds = math.log(w) - math.log1p(-w)
    for h in _forward_window(s, q, total_seasons):
        cs = window_sum(c, s + h, q)
        us = window_sum(u_mod, s + h, q)
        total -= gammaln(upsilon + us) + gammaln(kappa + cs - us)
        log_odds += math.log(rho[s + h - 1]) - math.log1p(-rho[s + h - 1])
    return total + value * log_odds


def log_target_beta(
    beta: np.ndarray, sum_yx: np.ndarray, weight_flat: np.ndarray, x_flat: np.ndarray,
    mu_beta: np.ndarray, prec_beta: np.ndarray,
) -> float:
    lin = x_flat @ beta if beta.size else np.zeros(weight_flat.shape[0])
    diff = beta - mu_beta
    return float(sum_yx @ beta - weight_flat @ np.exp(lin) - 0.5 * diff @ (prec_beta * diff))


def log_target_delta(
    delta: np.ndarray, v_flat: np.ndarray, resid_flat: np.ndarray,
    mu_delta: np.ndarray, prec_delta: np.ndarray,
) -> float:
    lin = v_flat @ delta if delta.size else np.zeros(resid_flat.shape[0])
    diff = delta - mu_delta
    return float(0.5 * lin.sum() - resid_flat @ np.exp(lin) - 0.5 * diff @ (prec_delta * diff))


class _AdaptiveScale:
    """Batch acceptance-rate adaptation, frozen after burn-in."""

    def __init__(self, scale: float, window: int, target: float):
        self.scale = scale
        self.window = window
        self.target = target
        self.accepted = 0
        self.proposed = 0
        self.post_accepted = 0
        self.post_proposed = 0

    def record(self, accepted: bool, adapting: bool):
        if adapting:
            self.proposed += 1
            self.accepted += int(accepted)
            if self.proposed >= self.window:
                rate = self.accepted / self.proposed
                self.scale = float(
                    np.clip(self.scale * math.exp(rate - self.target), 1e-6, 1e6)
                )
                self.accepted = 0
                self.proposed = 0
        else:
            self.post_proposed += 1
            self.post_accepted += int(accepted)

    @property
    def post_rate(self) -> float:
        return self.post_accepted / self.post_proposed if self.post_proposed else float("nan")


class GibbsSampler:
    """Runs the full Metropolis-within-Gibbs sweep over a dataset and graph."""

    def __init__(
        self,
        dataset: Dataset,
        graph: SpatialGraph,
        config: SamplerConfig,
        rng: np.random.Generator | None = None,
    ):
        if graph.n_areas != dataset.n_areas:
            raise ValidationError("graph and dataset disagree on the number of areas")
        self.dataset = dataset
        self.graph = graph
        self.config = config
        self.rng = rng if rng is not None else np.random.default_rng(config.seed)
        self.n = dataset.n_areas
        self.S = dataset.n_seasons
        self.q = config.q
        self.total_seasons = self.S + self.q
        self.p1 = dataset.p_mean
        self.p2 = dataset.p_disp

        self.mu_beta = _as_vector(config.mu_beta, self.p1, "mu_beta")
        self.prec_beta = 1.0 / _as_vector(config.sigma_beta, self.p1, "sigma_beta")
        self.mu_delta = _as_vector(config.mu_delta, self.p2, "mu_delta")
        self.prec_delta = 1.0 / _as_vector(config.sigma_delta, self.p2, "sigma_delta")

        self.ysum = dataset.ysum_area_season  # (n, S)
        n_obs = self.n * dataset.n_weeks
        self.x_flat = dataset.X.reshape(n_obs, self.p1)
        self.sum_yx = (
            self.x_flat.T @ dataset.y.reshape(-1).astype(float)
            if self.p1
            else np.zeros(0)
        )
        self.v_flat = dataset.V.reshape(self.n * self.S, self.p2)

        self.scales = {
            "upsilon": _AdaptiveScale(config.scale_upsilon, config.adapt_window, config.target_accept),
            "kappa": _AdaptiveScale(config.scale_kappa, config.adapt_window, config.target_accept),
            "beta": _AdaptiveScale(config.scale_beta, config.adapt_window, config.target_accept),
            "delta": _AdaptiveScale(config.scale_delta, config.adapt_window, config.target_accept),
            "c": _AdaptiveScale(1.0, config.adapt_window, config.target_accept),
            "u": _AdaptiveScale(1.0, config.adapt_window, config.target_accept),
        }
        self._adapting = True
        self._bfs_mark = [0] * self.n
        self._bfs_stamp = 0
        self.state = self._initial_state()
        self._refresh_expo()
        self._refresh_psi()

    # -- initialization -----------------------------------------------------

    def _initial_state(self) -> ChainState:
        cfg = self.config
        ups = cfg.fix_upsilon if cfg.fix_upsilon is not None else cfg.a_upsilon / cfg.b_upsilon
        kap = cfg.fix_kappa if cfg.fix_kappa is not None else cfg.a_kappa / cfg.b_kappa
        rho0 = ups / (ups + kap)
        trees, bits, labels = [], [], []
        single = Partition.single_cluster(self.n)
        for _ in range(self.total_seasons):
            tree = sample_compatible_tree(self.graph, single, self.rng)
            trees.append(tree)
            bits.append(np.ones(max(self.n - 1, 0), dtype=np.uint8))
            labels.append(single.labels.copy())
        return ChainState(
            trees=trees,
            bits=bits,
            labels=labels,
            k=np.ones(self.total_seasons, dtype=np.int64),
            theta=[np.ones(1) for _ in range(self.S)],
            theta_area=np.ones((self.n, self.S)),
            z=np.ones((self.n, self.S)),
            beta=self.mu_beta * 0.0,
            delta=self.mu_delta * 0.0,
            rho=np.full(self.total_seasons, rho0),
            u=np.zeros(self.total_seasons, dtype=np.int64),
            c=np.zeros(self.total_seasons, dtype=np.int64),
            w=0.5,
            zeta=cfg.a_zeta / cfg.b_zeta,
            upsilon=float(ups),
            kappa=float(kap),
        )

    def _refresh_expo(self):
        """exposure_is = sum_t O_it exp(X_it' beta) per (area, season)."""
        lam0 = linear_predictor_mean(self.dataset, self.state.beta) * self.dataset.offset
        self.expo = np.zeros((self.n, self.S))
        for s, weeks in enumerate(self.dataset.weeks_of_season):
            self.expo[:, s] = lam0[:, weeks].sum(axis=1)

    def _refresh_psi(self):
        if self.config.likelihood == "pig":
            self.psi = psi_matrix(self.dataset, self.state.delta)
        else:
            self.psi = np.ones((self.n, self.S))

    # -- hyperparameter blocks (steps 1-4) ----------------------------------

    def update_upsilon(self):
        if self.config.fix_upsilon is not None:
            return
        st = self.state
        cur = st.upsilon
        prop = cur * math.exp(self.scales["upsilon"].scale * self.rng.standard_normal())
        args = (st.kappa, st.w, st.rho, st.u, st.c, self.S, self.q,
                self.config.a_upsilon, self.config.b_upsilon)
        # log-scale random walk: include the Jacobian log(prop/cur)
        log_ratio = (
            log_target_upsilon(prop, *args) - log_target_upsilon(cur, *args)
            + math.log(prop) - math.log(cur)
        )
        accepted = math.log(self.rng.random()) < log_ratio
        if accepted:
            st.upsilon = prop
        self.scales["upsilon"].record(accepted, self._adapting)

    def update_kappa(self):
        if self.config.fix_kappa is not None:
            return
        st = self.state
        cur = st.kappa
        prop = cur * math.exp(self.scales["kappa"].scale * self.rng.standard_normal())
        args = (st.upsilon, st.w, st.rho, st.u, st.c, self.S, self.q,
                self.config.a_kappa, self.config.b_kappa)
        log_ratio = (
            log_target_kappa(prop, *args) - log_target_kappa(cur, *args)
            + math.log(prop) - math.log(cur)
        )
        accepted = math.log(self.rng.random()) < log_ratio
        if accepted:
            st.kappa = prop
        self.scales["kappa"].record(accepted, self._adapting)

    def update_zeta(self):
        st = self.state
        shape = self.config.a_zeta + float(st.c[: self.S].sum())
        rate = self.config.b_zeta + self.S
        st.zeta = float(self.rng.gamma(shape, 1.0 / rate))

    def update_w(self):
        st = self.state
        a = st.upsilon + float(st.u[: self.S].sum())
        b = st.kappa + float((st.c[: self.S] - st.u[: self.S]).sum())
        st.w = float(np.clip(self.rng.beta(a, b), _W_EPS, 1.0 - _W_EPS))

    # -- per-season blocks (steps 5-11) --------------------------------------

    def update_tree(self, s: int):
        """Resample a spanning tree compatible with the current partition."""
        st = self.state
        part = Partition.from_labels(st.labels[s - 1])
        tree = sample_compatible_tree(self.graph, part, self.rng)
        st.trees[s - 1] = tree
        st.bits[s - 1] = indicators_from_partition(tree, part)

    def _component_sums(self, adj, bits, start: int, skip_pos: int, y_list, g_list):
        """Totals of y and exposure over the component of `start` in kept-minus-skip."""
        stamp = self._bfs_stamp + 1
        self._bfs_stamp = stamp
        mark = self._bfs_mark
        mark[start] = stamp
        stack = [start]
        y_tot = y_list[start]
        g_tot = g_list[start]
        while stack:
            v = stack.pop()
            for w, pos in adj[v]:
                if pos != skip_pos and bits[pos] and mark[w] != stamp:
                    mark[w] = stamp
                    y_tot += y_list[w]
                    g_tot += g_list[w]
                    stack.append(w)
        return y_tot, g_tot

    def update_partition(self, s: int):
        """Partially collapsed per-edge Gibbs sweep over keep/remove bits.

        The keep/remove ratio integrates the cluster intercepts against their
        gamma prior and the removal probability against its conditional beta
        law; k_s in the leading factor counts clusters with the edge kept.
        """
        if self.n <= 1:
            return
        st = self.state
        cfg = self.config
        tree = st.trees[s - 1]
        adj = tree.adjacency
        bits = st.bits[s - 1].tolist()
        pairs = tree.edge_pairs
        su = window_sum(st.u, s, self.q)
        scu = window_sum(st.c, s, self.q) - su
        g_list = (st.z[:, s - 1] * self.expo[:, s - 1]).tolist()
        y_list = self.ysum[:, s - 1].tolist()
        const = gammaln(cfg.a_theta) - cfg.a_theta * math.log(cfg.b_theta)
        lgam = math.lgamma
        log = math.log
        a_t, b_t = cfg.a_theta, cfg.b_theta
        kappa_term = self.n + st.kappa + scu - 1.0
        upsilon_term = st.upsilon + su - 1.0
        k_cur = int(st.k[s - 1])
        uniforms = self.rng.random(self.n - 1)
        for pos in range(self.n - 1):
            a_node, b_node = int(pairs[pos, 0]), int(pairs[pos, 1])
            y_a, g_a = self._component_sums(adj, bits, a_node, pos, y_list, g_list)
            y_b, g_b = self._component_sums(adj, bits, b_node, pos, y_list, g_list)
            k_kept = k_cur if bits[pos] else k_cur - 1
            log_r = (
                log(kappa_term - k_kept)
                - log(k_kept + upsilon_term)
                + const
                + lgam(a_t + y_a + y_b) - (a_t + y_a + y_b) * log(b_t + g_a + g_b)
                - lgam(a_t + y_a) + (a_t + y_a) * log(b_t + g_a)
                - lgam(a_t + y_b) + (a_t + y_b) * log(b_t + g_b)
            )
            uu = uniforms[pos]
            remove = log_r < log(uu) - math.log1p(-uu)
            new_bit = 0 if remove else 1
            if new_bit != bits[pos]:
                k_cur += 1 if new_bit == 0 else -1
                bits[pos] = new_bit
        bits_arr = np.array(bits, dtype=np.uint8)
        st.bits[s - 1] = bits_arr
        part = partition_from_indicators(tree, bits_arr)
        st.labels[s - 1] = part.labels.copy()
        st.k[s - 1] = part.k
        if part.k != k_cur:
            raise InvariantError(
                f"indicator bits and partition disagree in season {s}",
                dump=self.state.summary_dump(),
            )

    def update_c(self, s: int):
        if self.config.independence:
            return
        st = self.state
        cur = int(st.c[s - 1])
        prop = cur + (1 if self.rng.random() < 0.5 else -1)
        args = (s, st.u, st.c, st.rho, st.w, st.zeta, st.upsilon, st.kappa,
                self.q, self.total_seasons)
        new_lt = log_target_c(prop, *args)
        accepted = False
        if new_lt != LOG_ZERO:
            log_ratio = new_lt - log_target_c(cur, *args)
            accepted = math.log(self.rng.random()) < log_ratio
        if accepted:
            st.c[s - 1] = prop
        self.scales["c"].record(accepted, False)

    def update_u(self, s: int):
        if self.config.independence:
            return
        st = self.state
        cur = int(st.u[s - 1])
        prop = cur + (1 if self.rng.random() < 0.5 else -1)
        args = (s, st.u, st.c, st.rho, st.w, st.upsilon, st.kappa, self.q, self.total_seasons)
        new_lt = log_target_u(prop, *args)
        accepted = False
        if new_lt != LOG_ZERO:
            log_ratio = new_lt - log_target_u(cur, *args)
            accepted = math.log(self.rng.random()) < log_ratio
        if accepted:
            st.u[s - 1] = prop
        self.scales["u"].record(accepted, False)

    def update_rho(self, s: int):
        st = self.state
        su = window_sum(st.u, s, self.q)
        scu = window_sum(st.c, s, self.q) - su
        k_s = float(st.k[s - 1])
        a = k_s + st.upsilon + su - 1.0
        b = self.n - k_s + st.kappa + scu
        st.rho[s - 1] = float(np.clip(self.rng.beta(a, b), _RHO_EPS, 1.0 - _RHO_EPS))

    def update_theta(self, s: int):
        st = self.state
        cfg = self.config
        k_s = int(st.k[s - 1])
        labels = st.labels[s - 1]
        g_area = st.z[:, s - 1] * self.expo[:, s - 1]
        theta = np.empty(k_s)
        for j in range(k_s):
            members = labels == j
            shape = cfg.a_theta + float(self.ysum[members, s - 1].sum())
            rate = cfg.b_theta + float(g_area[members].sum())
            theta[j] = self.rng.gamma(shape, 1.0 / rate)
        st.theta[s - 1] = theta
        st.theta_area[:, s - 1] = theta[labels]

    def update_z(self, s: int):
        if self.config.likelihood != "pig":
            return
        st = self.state
        p = self.ysum[:, s - 1] - 0.5
        a = 2.0 * st.theta_area[:, s - 1] * self.expo[:, s - 1] + self.psi[:, s - 1]
        b = self.psi[:, s - 1]
        st.z[:, s - 1] = sample_gig(p, a, b, self.rng)

    # -- horizon extension (steps 12-16) -------------------------------------

    def extend_horizon(self):
        """Refresh the q data-free seasons feeding the autoregressive window."""
        st = self.state
        for s in range(self.S + 1, self.total_seasons + 1):
            self.update_tree(s)
            if self.n > 1:
                # prior-only edge sweep: remove iff (1-rho)/rho < u/(1-u)
                rho_s = st.rho[s - 1]
                uu = self.rng.random(self.n - 1)
                log_r = math.log1p(-rho_s) - math.log(rho_s)
                remove = log_r < np.log(uu) - np.log1p(-uu)
                bits = (~remove).astype(np.uint8)
                st.bits[s - 1] = bits
                part = partition_from_indicators(st.trees[s - 1], bits)
                st.labels[s - 1] = part.labels.copy()
                st.k[s - 1] = part.k
            self.update_c(s)
            self.update_u(s)
            self.update_rho(s)

    # -- regression blocks (steps 17-18) --------------------------------------

    def _beta_weights(self) -> np.ndarray:
        st = self.state
        sow = self.dataset.season_of_week
        w = self.dataset.offset * st.z[:, sow] * st.theta_area[:, sow]
        return w.reshape(-1)

    def update_beta(self):
        if self.p1 == 0:
            return
        st = self.state
        weight_flat = self._beta_weights()
        cur = st.beta
        prop = cur + self.scales["beta"].scale * self.rng.standard_normal(self.p1)
        args = (self.sum_yx, weight_flat, self.x_flat, self.mu_beta, self.prec_beta)
        log_ratio = log_target_beta(prop, *args) - log_target_beta(cur, *args)
        accepted = math.log(self.rng.random()) < log_ratio
        if accepted:
            st.beta = prop
            self._refresh_expo()
        self.scales["beta"].record(accepted, self._adapting)

    def update_delta(self):
        if self.config.likelihood != "pig" or self.p2 == 0:
            return
        st = self.state
        resid_flat = ((st.z - 1.0) ** 2 / (2.0 * st.z)).reshape(-1)
        cur = st.delta
        prop = cur + self.scales["delta"].scale * self.rng.standard_normal(self.p2)
        args = (self.v_flat, resid_flat, self.mu_delta, self.prec_delta)
        log_ratio = log_target_delta(prop, *args) - log_target_delta(cur, *args)
        accepted = math.log(self.rng.random()) < log_ratio
        if accepted:
            st.delta = prop
            self._refresh_psi()
        self.scales["delta"].record(accepted, self._adapting)

    # -- sweep and run --------------------------------------------------------

    def sweep(self):
        self.update_upsilon()
        self.update_kappa()
        self.update_zeta()
        self.update_w()
        for s in range(1, self.S + 1):
            self.update_tree(s)
            self.update_partition(s)
            self.update_c(s)
            self.update_u(s)
            self.update_rho(s)
            self.update_theta(s)
            self.update_z(s)
        self.extend_horizon()
        self.update_beta()
        self.update_delta()

    def _check_invariants(self, iteration: int):
        st = self.state
        for s in range(1, self.total_seasons + 1):
            part = Partition.from_labels(st.labels[s - 1])
            if self.n > 1 and partition_from_indicators(st.trees[s - 1], st.bits[s - 1]) != part:
                raise InvariantError(
                    f"tree/partition incompatible in season {s} at iteration {iteration}",
                    dump=st.summary_dump(),
                )
        if np.any(st.u > st.c) or np.any(st.u < 0):
            raise InvariantError(
                f"latent support violated at iteration {iteration}", dump=st.summary_dump()
            )
        if np.any(st.z <= 0) or any(np.any(t <= 0) for t in st.theta):
            raise InvariantError(
                f"positivity violated at iteration {iteration}", dump=st.summary_dump()
            )

    def run(self) -> SampleStore:
        cfg = self.config
        n_draws = cfg.n_draws
        burn_end = cfg.n_iter - n_draws * cfg.thin
        D = n_draws
        n_obs = self.n * self.dataset.n_weeks
        store = SampleStore(
            config=cfg,
            n_draws=D,
            upsilon=np.empty(D), kappa=np.empty(D), zeta=np.empty(D), w=np.empty(D),
            beta=np.empty((D, self.p1)), delta=np.empty((D, self.p2)),
            rho=np.empty((D, self.total_seasons)),
            u=np.empty((D, self.total_seasons), dtype=np.int64),
            c=np.empty((D, self.total_seasons), dtype=np.int64),
            k=np.empty((D, self.total_seasons), dtype=np.int64),
            labels=np.empty((D, self.S, self.n), dtype=np.int32),
            theta_area=np.empty((D, self.S, self.n)),
            z=np.empty((D, self.S, self.n)),
            loglik_marginal=np.empty((D, n_obs)),
            loglik_conditional=np.empty((D, n_obs)),
            accept_rates={},
            proposal_scales={},
            wall_time=0.0,
        )
        t0 = time.perf_counter()
        draw = 0
        for it in range(1, cfg.n_iter + 1):
            self._adapting = cfg.adapt and it <= burn_end
            self.sweep()
            if it > burn_end and (it - burn_end) % cfg.thin == 0:
                self._check_invariants(it)
                self._record(store, draw)
                draw += 1
        if draw != D:
            raise InvariantError(f"retained {draw} draws, expected {D}")
        store.accept_rates = {name: sc.post_rate for name, sc in self.scales.items()}
        store.proposal_scales = {name: sc.scale for name, sc in self.scales.items()}
        store.wall_time = time.perf_counter() - t0
        return store

    def _record(self, store: SampleStore, d: int):
        st = self.state
        store.upsilon[d] = st.upsilon
        store.kappa[d] = st.kappa
        store.zeta[d] = st.zeta
        store.w[d] = st.w
        store.beta[d] = st.beta
        store.delta[d] = st.delta
        store.rho[d] = st.rho
        store.u[d] = st.u
        store.c[d] = st.c
        store.k[d] = st.k
        for s in range(self.S):
            store.labels[d, s] = st.labels[s]
        store.theta_area[d] = st.theta_area.T
        store.z[d] = st.z.T
        cond = conditional_poisson_loglik(self.dataset, st.theta_area, st.z, st.beta)
        store.loglik_conditional[d] = cond.reshape(-1)
        if self.config.likelihood == "pig":
            marg = marginal_pig_loglik(self.dataset, st.theta_area, st.beta, self.psi)
            store.loglik_marginal[d] = marg.reshape(-1)
        else:
            store.loglik_marginal[d] = store.loglik_conditional[d]


def run_chain(
    dataset: Dataset,
    graph: SpatialGraph,
    config: SamplerConfig,
    rng: np.random.Generator | None = None,
) -> SampleStore:
    """Run one chain; bit-identical output for a given (config, seed)."""
    return GibbsSampler(dataset, graph, config, rng=rng).run()


def _run_chain_worker(args):
    dataset, graph, config, chain_index = args
    rng = np.random.default_rng(np.random.SeedSequence(config.seed, spawn_key=(chain_index,)))
    return run_chain(dataset, graph, config, rng=rng)


def run_chains(
    dataset: Dataset,
    graph: SpatialGraph,
    config: SamplerConfig,
    n_chains: int,
    n_workers: int | None = None,
) -> list[SampleStore]:
    """Independent chains with per-chain RNG streams, optionally in parallel."""
    jobs = [(dataset, graph, config, idx) for idx in range(n_chains)]
    if n_chains == 1 or n_workers == 1:
        return [_run_chain_worker(job) for job in jobs]
    import concurrent.futures as cf
    import os

    workers = n_workers or min(n_chains, os.cpu_count() or 1)
    with cf.ProcessPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(_run_chain_worker, jobs))
