"""Marginal topic-probability curves and one-step-ahead forecasts.

The marginal probability of topic k at slice t is estimated as the expected
topic proportion of a new document arriving at t: for every posterior sample
of alpha, ``n_mc`` rows ``eta ~ N(F' alpha_{k,t}, a2)`` (with the pinned last
topic at 0) are pushed through the softmax. Means average over samples and
draws; by default the bands are quantiles of the pooled new-document draws.
"""

import math
from dataclasses import dataclass

import numpy as np

from dltm.conditionals import softmax
from dltm.diagnostics import total_variation
from dltm.dlm import mvn_draw
from dltm.gibbs import Hyperparams
from dltm.rng import keyed_generator

BANDS = ("new_document", "posterior")


@dataclass
class TopicTrendCurve:
    times: np.ndarray  # slice indices (0-based; >= T for forecasts)
    mean: np.ndarray  # (n_times, K)
    lo: np.ndarray
    hi: np.ndarray
    quantiles: tuple = (0.025, 0.975)

    def to_csv(self):
        lines = ["t,k,mean,lo,hi"]
        for i, t in enumerate(self.times):
            for k in range(self.mean.shape[1]):
                vals = ",".join(format(float(x), ".17g") for x in (self.mean[i, k], self.lo[i, k], self.hi[i, k]))
                lines.append(f"{int(t)},{k},{vals}")
        return "\n".join(lines) + "\n"


def archive_spec(archive):
    """Rebuild the state-space spec recorded in an archive's config echo."""
    hp = Hyperparams(**archive.hyper)
    cfg = archive.config
    return hp.state_space(cfg.get("trend", "random_walk"), cfg.get("omega", math.pi / 2))


def _new_doc_props(means, noise, a2, include_obs_noise):
    # means (K-1,), noise (n_mc, K-1) -> (n_mc, K)
    eta = means[None, :] + (math.sqrt(a2) * noise if include_obs_noise else 0.0)
    eta = np.concatenate([eta, np.zeros((eta.shape[0], 1))], axis=1)
    return softmax(eta, axis=1)


def _summarize(per_sample, pooled, quantiles, band):
    # per_sample (S, n_times, K); pooled (S, n_times, n_mc, K)
    mean = per_sample.mean(axis=0)
    if band == "new_document":
        flat = np.moveaxis(pooled, 2, 1).reshape(-1, *pooled.shape[1:2], pooled.shape[-1])
        lo, hi = np.quantile(flat, quantiles, axis=0)
    else:
        lo, hi = np.quantile(per_sample, quantiles, axis=0)
    return mean, lo, hi


def _check(archive, n_mc, band):
    if archive.n_samples < 1:
        raise ValueError("archive has no samples")
    if n_mc < 1:
        raise ValueError("n_mc must be >= 1")
    if band not in BANDS:
        raise ValueError(f"band must be one of {BANDS}")


def marginal_topic_curve(
    archive, spec=None, a2=None, n_mc=200, seed=0, times=None,
    include_obs_noise=True, quantiles=(0.025, 0.975), band="new_document",
):
    """Posterior marginal topic probabilities per slice, with bands."""
    _check(archive, n_mc, band)
    spec = spec or archive_spec(archive)
    a2 = spec.obs_var if a2 is None else a2
    times = np.arange(archive.T) if times is None else np.atleast_1d(times)
    S, K = archive.n_samples, archive.K
    per_sample = np.empty((S, times.size, K))
    pooled = np.empty((S, times.size, n_mc, K))
    for s in range(S):
        gen = keyed_generator(seed, s)
        noise = gen.standard_normal((times.size, n_mc, K - 1))
        for i, t in enumerate(times):
            means = archive.alpha[s, :, t] @ spec.F_row
            pooled[s, i] = _new_doc_props(means, noise[i], a2, include_obs_noise)
        per_sample[s] = pooled[s].mean(axis=1)
    mean, lo, hi = _summarize(per_sample, pooled, quantiles, band)
    return TopicTrendCurve(times, mean, lo, hi, tuple(quantiles))


def forecast_curve(
    archive, spec=None, a2=None, horizon=1, n_mc=200, seed=0,
    include_obs_noise=True, quantiles=(0.025, 0.975), band="new_document",
):
    """Predictive marginal topic curve at slices T..T+h-1 (0-based).

    Each alpha sample at the last fitted slice is propagated through
    ``alpha' = G alpha + xi``, ``xi ~ N(0, W)``, one step at a time.
    """
    _check(archive, n_mc, band)
    if horizon < 1:
        raise ValueError("horizon must be >= 1")
    spec = spec or archive_spec(archive)
    a2 = spec.obs_var if a2 is None else a2
    S, K, T = archive.n_samples, archive.K, archive.T
    zero = np.zeros(spec.p)
    per_sample = np.empty((S, horizon, K))
    pooled = np.empty((S, horizon, n_mc, K))
    for s in range(S):
        gen = keyed_generator(seed, s)
        noise = gen.standard_normal((horizon, n_mc, K - 1))
        state = archive.alpha[s, :, T - 1].copy()
        for h in range(horizon):
            for k in range(K - 1):
                state[k] = spec.G @ state[k] + mvn_draw(gen, zero, spec.W)
            pooled[s, h] = _new_doc_props(state @ spec.F_row, noise[h], a2, include_obs_noise)
        per_sample[s] = pooled[s].mean(axis=1)
    mean, lo, hi = _summarize(per_sample, pooled, quantiles, band)
    return TopicTrendCurve(np.arange(T, T + horizon), mean, lo, hi, tuple(quantiles))


def one_step_ahead(archive, spec=None, a2=None, n_mc=200, seed=0, **kw):
    """Predictive topic simplex for the slice after the last fitted one: ``(mean, lo, hi)``."""
    c = forecast_curve(archive, spec, a2, horizon=1, n_mc=n_mc, seed=seed, **kw)
    return c.mean[0], c.lo[0], c.hi[0]


def prediction_error(predicted, realized):
    """TV between a predicted and a realized topic simplex."""
    predicted = np.asarray(predicted, dtype=float)
    realized = np.asarray(realized, dtype=float)
    if predicted.shape != realized.shape:
        raise ValueError("predicted and realized must have equal length")
    return total_variation(predicted, realized)
