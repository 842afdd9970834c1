"""Gaussian full conditionals for topic and document natural parameters.

Conditioning a softmax coordinate on the others turns the multinomial
likelihood into a binomial one in

    gamma_v = beta_v - log sum_{j != v} exp(beta_j)

(and likewise ``psi_k`` for document proportions). With a Polya-Gamma
auxiliary the binomial term is Gaussian in ``beta_v``, so each coordinate has a
closed-form conditional. The scalar helpers here are numba-jitted so the sweep
kernels in ``dltm.gibbs`` call the very same code.

Numerics: all simplex arithmetic is done in log space with the max subtracted;
natural parameters are expected to stay within |x| <= 700.
"""

import math

import numpy as np
from numba import njit


@njit(cache=True)
def log_sum_excluding(x, skip):
    """``log sum_{j != skip} exp(x_j)`` (max-shifted)."""
    n = x.shape[0]
    mx = -np.inf
    for j in range(n):
        if j != skip and x[j] > mx:
            mx = x[j]
    if mx == -np.inf:
        return -np.inf
    acc = 0.0
    for j in range(n):
        if j != skip:
            acc += math.exp(x[j] - mx)
    return mx + math.log(acc)


@njit(cache=True)
def _exclusion_transform(x, idx):
    return x[idx] - log_sum_excluding(x, idx)


def gamma_transform(beta_slice, v):
    """``beta_v - log sum_{j != v} exp(beta_j)`` for one topic at one slice."""
    beta_slice = np.ascontiguousarray(beta_slice, dtype=float)
    if beta_slice.size < 2:
        raise ValueError("need at least two vocabulary terms")
    return float(_exclusion_transform(beta_slice, int(v)))


def psi_transform(eta_row, k):
    """``eta_k - log sum_{j != k} exp(eta_j)`` for one document."""
    eta_row = np.ascontiguousarray(eta_row, dtype=float)
    if eta_row.size < 2:
        raise ValueError("need at least two topics")
    return float(_exclusion_transform(eta_row, int(k)))


def kappa(count, total):
    """Centered count ``count - total / 2`` (both beta and eta steps)."""
    return count - 0.5 * total


@njit(cache=True)
def beta_filter_moments(kap, zeta, log_sum_excl, m_prev, rho2):
    s2 = 1.0 / (zeta + 1.0 / rho2)
    m = s2 * (kap + zeta * log_sum_excl + m_prev / rho2)
    return m, s2


def beta_filter_update(kap, zeta, log_sum_excl, m_prev, rho2):
    """Filtered Gaussian moments ``(m, s2)`` of ``beta_{k,v,t}``.

    ``rho2`` is the one-step prior variance (previous filtered variance plus the
    innovation variance); ``zeta = 0`` gives the pure prior update.
    """
    if not rho2 > 0:
        raise ValueError("prior variance rho2 must be positive")
    if zeta < 0:
        raise ValueError("Polya-Gamma auxiliary must be nonnegative")
    return beta_filter_moments(float(kap), float(zeta), float(log_sum_excl), float(m_prev), float(rho2))


@njit(cache=True)
def beta_backward_moments(beta_next, m_t, s2_t, s2_innov):
    if s2_t <= 0.0:
        return m_t, 0.0
    prec = 1.0 / s2_innov + 1.0 / s2_t
    s2 = 1.0 / prec
    return s2 * (beta_next / s2_innov + m_t / s2_t), s2


def beta_backward_step(beta_next, m_t, s2_t, s2_innov, rng):
    """Draw ``beta_{k,v,t}`` given ``beta_{k,v,t+1}`` and its filtered moments."""
    if s2_innov <= 0 or s2_t < 0:
        raise ValueError("variances must be positive")
    m, s2 = beta_backward_moments(float(beta_next), float(m_t), float(s2_t), float(s2_innov))
    return m + math.sqrt(s2) * rng.standard_normal()


@njit(cache=True)
def eta_moments(kap, omega, log_sum_excl, prior_mean, a2):
    lam2 = 1.0 / (omega + 1.0 / a2)
    q = lam2 * (kap + omega * log_sum_excl + prior_mean / a2)
    return q, lam2


def eta_conditional(kap, omega, log_sum_excl, prior_mean, a2):
    """Conditional moments ``(q, lambda2)`` of ``eta_{d,k,t}``.

    ``prior_mean`` is the design row times the topic state, ``F_d' alpha_{k,t}``.
    """
    if not a2 > 0:
        raise ValueError("observation variance a2 must be positive")
    if omega < 0:
        raise ValueError("Polya-Gamma auxiliary must be nonnegative")
    return eta_moments(float(kap), float(omega), float(log_sum_excl), float(prior_mean), float(a2))


def log_softmax(x, axis=-1):
    x = np.asarray(x, dtype=float)
    mx = np.max(x, axis=axis, keepdims=True)
    mx = np.where(np.isfinite(mx), mx, 0.0)
    return x - mx - np.log(np.sum(np.exp(x - mx), axis=axis, keepdims=True))


def softmax(x, axis=-1):
    return np.exp(log_softmax(x, axis=axis))


def z_conditional(w, beta_t, eta_row):
    """Topic probabilities for one word: ``softmax(beta_k)_w * exp(eta_k)``, normalized.

    ``beta_t`` is K x V at the document's slice, ``eta_row`` the document's K-vector.
    """
    beta_t = np.asarray(beta_t, dtype=float)
    if not 0 <= w < beta_t.shape[1]:
        raise ValueError("word id out of range")
    logits = log_softmax(beta_t, axis=1)[:, w] + np.asarray(eta_row, dtype=float)
    return softmax(logits)
