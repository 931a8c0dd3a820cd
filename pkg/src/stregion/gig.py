"""Generalized inverse Gaussian sampling.

Density convention: GIG(p, a, b) has density proportional to
x^(p-1) * exp(-(a*x + b/x)/2) on x > 0, with a > 0 and b > 0.  Under this
reading GIG(-1/2, psi, psi) is exactly the unit-mean inverse Gaussian with
shape psi, which is the heterogeneity prior of the observation model.

Draws use the uniformly-fast rejection method of Devroye (2014): transform to
the two-parameter form gig(|p|, omega) with omega = sqrt(a*b), sample the
log-scale mode-centred variable under a three-piece envelope (flat centre,
exponential tails), and map back, inverting the draw when p < 0.
"""
from __future__ import annotations

import numpy as np

from .errors import StregionError, ValidationError

_MAX_REJECTION_ROUNDS = 500


def _log_concave_envelope(lam: np.ndarray, omega: np.ndarray):
    """Envelope constants for the mode-centred log density psi(x)."""
    # alpha = sqrt(omega^2 + lam^2) - lam, computed without cancellation
    hyp = np.hypot(omega, lam)
    alpha = omega**2 / (hyp + lam)

    def psi(x):
        return -alpha * (np.cosh(x) - 1.0) - lam * (np.expm1(x) - x)

    def dpsi(x):
        return -alpha * np.sinh(x) - lam * np.expm1(x)

    with np.errstate(divide="ignore", invalid="ignore", over="ignore"):
        v = -psi(np.ones_like(lam))
        t = np.where(
            (0.5 <= v) & (v <= 2.0),
            1.0,
            np.where(v > 2.0, np.sqrt(2.0 / (alpha + lam)), np.log(4.0 / (alpha + 2.0 * lam))),
        )
        v = -psi(-np.ones_like(lam))
        inv_lam = np.where(lam > 0, 1.0 / np.where(lam > 0, lam, 1.0), np.inf)
        s_small = np.minimum(
            inv_lam, np.log1p(1.0 / alpha + np.sqrt(1.0 / alpha**2 + 2.0 / alpha))
        )
        s = np.where(
            (0.5 <= v) & (v <= 2.0),
            1.0,
            np.where(v > 2.0, np.sqrt(4.0 / (alpha * np.cosh(1.0) + lam)), s_small),
        )

    eta = -psi(t)
    zeta = -dpsi(t)
    theta = -psi(-s)
    xi = dpsi(-s)
    p_w = 1.0 / xi
    r_w = 1.0 / zeta
    td = t - r_w * eta
    sd = s - p_w * theta
    q_w = td + sd
    return psi, t, s, eta, zeta, theta, xi, p_w, r_w, td, sd, q_w


def _gig_two_param(lam: np.ndarray, omega: np.ndarray, rng: np.random.Generator) -> np.ndarray:
    """Draws from gig(lam, omega), lam >= 0, returned on the original scale."""
    psi, t, s, eta, zeta, theta, xi, p_w, r_w, td, sd, q_w = _log_concave_envelope(lam, omega)
    total = p_w + q_w + r_w
    n = lam.shape[0]
    x = np.empty(n)
    pending = np.arange(n)
    for _ in range(_MAX_REJECTION_ROUNDS):
        m = pending.size
        if m == 0:
            break
        u = rng.random(m)
        v = rng.random(m)
        w = rng.random(m)
        tot = total[pending]
        cand = np.where(
            u * tot < q_w[pending],
            -sd[pending] + q_w[pending] * v,
            np.where(
                u * tot < q_w[pending] + r_w[pending],
                td[pending] - r_w[pending] * np.log(v),
                -sd[pending] + p_w[pending] * np.log(v),
            ),
        )
        chi_log = np.where(
            cand > td[pending],
            -eta[pending] - zeta[pending] * (cand - t[pending]),
            np.where(cand < -sd[pending], -theta[pending] + xi[pending] * (cand + s[pending]), 0.0),
        )
        lam_p, omega_p = lam[pending], omega[pending]
        hyp = np.hypot(omega_p, lam_p)
        alpha = omega_p**2 / (hyp + lam_p)
        psival = -alpha * (np.cosh(cand) - 1.0) - lam_p * (np.expm1(cand) - cand)
        accept = np.log(w) + chi_log <= psival
        x[pending[accept]] = cand[accept]
        pending = pending[~accept]
    else:
        raise StregionError("GIG rejection sampler failed to converge")
    # back-transform: mode of gig(lam, omega) is (lam + hypot(lam, omega)) / omega
    return np.exp(x) * (lam / omega + np.sqrt(1.0 + (lam / omega) ** 2))


def sample_gig(p, a, b, rng: np.random.Generator, size=None):
    """Draws from GIG(p, a, b) with density ~ x^(p-1) exp(-(a x + b/x)/2).

    p, a, b broadcast together; `size` requests that many iid draws when the
    parameters are scalar (or must match the broadcast shape). Returns a float
    for all-scalar input without size, else an array.
    """
    p_arr = np.asarray(p, dtype=float)
    a_arr = np.asarray(a, dtype=float)
    b_arr = np.asarray(b, dtype=float)
    shape = np.broadcast_shapes(p_arr.shape, a_arr.shape, b_arr.shape)
    if size is not None:
        shape = np.broadcast_shapes(shape, tuple(np.atleast_1d(size)))
    scalar = shape == () and size is None
    if shape == ():
        shape = (1,)
    p_b = np.broadcast_to(p_arr, shape).ravel()
    a_b = np.broadcast_to(a_arr, shape).ravel()
    b_b = np.broadcast_to(b_arr, shape).ravel()
    if np.any(a_b <= 0) or np.any(b_b <= 0) or not (
        np.all(np.isfinite(a_b)) and np.all(np.isfinite(b_b)) and np.all(np.isfinite(p_b))
    ):
        raise ValidationError("GIG requires finite parameters with a > 0 and b > 0")
    lam = np.abs(p_b)
    omega = np.sqrt(a_b * b_b)
    draw = _gig_two_param(lam, omega, rng)
    draw = np.where(p_b < 0, 1.0 / draw, draw)
    draw = draw * np.sqrt(b_b / a_b)
    if scalar:
        return float(draw[0])
    return draw.reshape(shape)
