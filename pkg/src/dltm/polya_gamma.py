"""Polya-Gamma PG(b, c) moments and samplers.

Exact draws sum ``b`` independent PG(1, c) variates, each produced by the
alternating-series accept/reject sampler for the tilted J*(1, z) law. The
approximate sampler replaces the sum by a single Gaussian with the same mean
and variance, which is accurate once ``b`` is moderately large.

All samplers run as numba kernels on keyed counter streams (see ``dltm.rng``);
the public functions accept a ``numpy.random.Generator`` and derive a key from it.
"""

import csv
import io
import math
import time
from dataclasses import dataclass

import numpy as np
from numba import njit

from dltm.rng import as_generator, exponential, fold, key_from_generator, normal, uniform

TRUNC = 0.64
_TRUNC_RECIP = 1.0 / TRUNC
_PI = math.pi
_PI2_8 = _PI * _PI / 8.0
_LOG_HALF_PI = math.log(0.5 * _PI)
_SQRT2 = math.sqrt(2.0)

DEFAULT_THRESHOLD = 20
POSITIVITY_FLOOR = 1e-12

_MEAN_SERIES_CUT = 1e-6
_VAR_SERIES_CUT = 0.5


def _mean1_impl(c):
    x = 0.5 * abs(c)
    if x < 0.5 * _MEAN_SERIES_CUT:
        # tanh(x)/x = 1 - x^2/3 + 2x^4/15
        x2 = x * x
        return 0.25 * (1.0 - x2 / 3.0 + 2.0 * x2 * x2 / 15.0)
    return 0.25 * math.tanh(x) / x


def _var1_impl(c):
    c = abs(c)
    if c < _VAR_SERIES_CUT:
        # (sinh c - c)/c^3 = sum_n c^(2n) / (2n+3)!, sech^2(c/2) kept exact
        c2 = c * c
        term = 1.0 / 6.0
        acc = term
        for n in range(1, 9):
            term *= c2 / ((2 * n + 2) * (2 * n + 3))
            acc += term
        sech = 1.0 / math.cosh(0.5 * c)
        return 0.25 * sech * sech * acc
    # sech^2(c/2) sinh(c) = 2 tanh(c/2): avoids overflow for large |c|
    sech = 1.0 / math.cosh(0.5 * c) if c < 1400.0 else 0.0
    return 0.25 * (2.0 * math.tanh(0.5 * c) - c * sech * sech) / (c * c * c)


_mean1 = njit(cache=True)(_mean1_impl)
_var1 = njit(cache=True)(_var1_impl)


@njit(cache=True)
def _map_mean1(c):
    out = np.empty_like(c)
    for i in range(c.size):
        out.flat[i] = _mean1(c.flat[i])
    return out


@njit(cache=True)
def _map_var1(c):
    out = np.empty_like(c)
    for i in range(c.size):
        out.flat[i] = _var1(c.flat[i])
    return out


def _mean1_ufunc(c):
    c = np.asarray(c, dtype=float)
    return _map_mean1(np.ascontiguousarray(c).reshape(-1)).reshape(c.shape)


def _var1_ufunc(c):
    c = np.asarray(c, dtype=float)
    return _map_var1(np.ascontiguousarray(c).reshape(-1)).reshape(c.shape)


def _scalar_or_array(out):
    return out.item() if np.ndim(out) == 0 else out


def pg_mean(b, c):
    """Mean of PG(b, c): ``b / (2c) * tanh(c / 2)``, with limit ``b / 4`` at c = 0."""
    b = np.asarray(b, dtype=float)
    if np.any(b < 1):
        raise ValueError("PG shape b must be >= 1")
    return _scalar_or_array(b * _mean1_ufunc(np.asarray(c, dtype=float)))


def pg_variance(b, c):
    """Variance of PG(b, c): ``b / (4c^3) * sech^2(c/2) * (sinh(c) - c)``; ``b / 24`` at c = 0."""
    b = np.asarray(b, dtype=float)
    if np.any(b < 1):
        raise ValueError("PG shape b must be >= 1")
    return _scalar_or_array(b * _var1_ufunc(np.asarray(c, dtype=float)))


# --------------------------------------------------------------------------
# PG(1, c) accept/reject kernel
# --------------------------------------------------------------------------


@njit(cache=True)
def _log_pnorm(x):
    return math.log(0.5 * math.erfc(-x / _SQRT2))


@njit(cache=True)
def _a_coef(n, x):
    k = (n + 0.5) * _PI
    if x > TRUNC:
        return k * math.exp(-0.5 * k * k * x)
    if x > 0.0:
        expnt = -1.5 * (_LOG_HALF_PI + math.log(x)) + math.log(k) - 2.0 * (n + 0.5) * (n + 0.5) / x
        return math.exp(expnt)
    return 0.0


@njit(cache=True)
def _mass_texpon(z, fz):
    t = TRUNC
    rt = math.sqrt(1.0 / t)
    b = rt * (t * z - 1.0)
    a = -rt * (t * z + 1.0)
    x0 = math.log(fz) + fz * t
    xb = x0 - z + _log_pnorm(b)
    xa = x0 + z + _log_pnorm(a)
    qdivp = 4.0 / _PI * (math.exp(xb) + math.exp(xa))
    return 1.0 / (1.0 + qdivp)


@njit(cache=True)
def _rtigauss(z, key, ctr):
    """Inverse-Gaussian(1/z, 1) truncated to (0, TRUNC)."""
    t = TRUNC
    x = t + 1.0
    if _TRUNC_RECIP > z:
        alpha = 0.0
        while True:
            u = uniform(key, ctr)
            ctr += 1
            if u <= alpha:
                break
            e1 = exponential(key, ctr)
            e2 = exponential(key, ctr + 1)
            ctr += 2
            while e1 * e1 > 2.0 * e2 / t:
                e1 = exponential(key, ctr)
                e2 = exponential(key, ctr + 1)
                ctr += 2
            x = 1.0 + e1 * t
            x = t / (x * x)
            alpha = math.exp(-0.5 * z * z * x)
    else:
        mu = 1.0 / z
        while x > t:
            y = normal(key, ctr)
            ctr += 2
            y *= y
            half_mu = 0.5 * mu
            mu_y = mu * y
            x = mu + half_mu * mu_y - half_mu * math.sqrt(4.0 * mu_y + mu_y * mu_y)
            u = uniform(key, ctr)
            ctr += 1
            if u > mu / (mu + x):
                x = mu * mu / x
    return x, ctr


@njit(cache=True)
def pg1_draw(c, key, ctr):
    """One exact PG(1, c) draw; returns ``(value, next_ctr)``."""
    z = 0.5 * abs(c)
    fz = _PI2_8 + 0.5 * z * z
    p_exp = _mass_texpon(z, fz)
    while True:
        u = uniform(key, ctr)
        ctr += 1
        if u < p_exp:
            x = TRUNC + exponential(key, ctr) / fz
            ctr += 1
        else:
            x, ctr = _rtigauss(z, key, ctr)
        s = _a_coef(0, x)
        y = uniform(key, ctr) * s
        ctr += 1
        n = 0
        while True:
            n += 1
            if n % 2 == 1:
                s -= _a_coef(n, x)
                if y <= s:
                    return 0.25 * x, ctr
            else:
                s += _a_coef(n, x)
                if y > s:
                    break


@njit(cache=True)
def pg_exact_draw(b, c, key):
    """Sum of ``b`` exact PG(1, c) draws, all from stream ``key``."""
    total = 0.0
    ctr = 0
    for _ in range(b):
        w, ctr = pg1_draw(c, key, ctr)
        total += w
    return total


@njit(cache=True)
def pg_gaussian_draw(b, c, key):
    """N(b E[PG(1,c)], b Var[PG(1,c)]) draw floored at POSITIVITY_FLOOR."""
    m = b * _mean1(c)
    v = b * _var1(c)
    w = m + math.sqrt(v) * normal(key, 0)
    if w < POSITIVITY_FLOOR:
        w = POSITIVITY_FLOOR
    return w


@njit(cache=True)
def pg_draw(b, c, threshold, key):
    """Dispatch: exact when ``b < threshold``, Gaussian otherwise. ``b == 0`` gives 0."""
    if b <= 0:
        return 0.0
    if b < threshold:
        return pg_exact_draw(b, c, key)
    return pg_gaussian_draw(b, c, key)


@njit(cache=True)
def _fill(b, c, threshold, key, out):
    for i in range(out.shape[0]):
        out[i] = pg_draw(b[i], c[i], threshold, fold(key, i))


def _draw_many(b, c, threshold, rng, size):
    rng = as_generator(rng)
    b_arr = np.asarray(b)
    if np.any(b_arr < 1):
        raise ValueError("PG shape b must be >= 1")
    if np.any(b_arr != np.round(b_arr)):
        raise ValueError("PG shape b must be an integer")
    shape = np.broadcast_shapes(np.shape(b), np.shape(c)) if size is None else tuple(np.atleast_1d(size))
    bb = np.ascontiguousarray(np.broadcast_to(b_arr, shape), dtype=np.int64).ravel()
    cc = np.ascontiguousarray(np.broadcast_to(np.asarray(c, dtype=float), shape)).ravel()
    out = np.empty(bb.shape[0])
    _fill(bb, cc, threshold, key_from_generator(rng), out)
    return _scalar_or_array(out.reshape(shape))


_NEVER = np.iinfo(np.int64).max


def pg_sample_exact(b, c, rng=None, size=None):
    """Exact PG(b, c) draws via the additive construction over PG(1, c)."""
    return _draw_many(b, c, _NEVER, rng, size)


def pg_sample_gaussian(b, c, rng=None, size=None):
    """Gaussian approximation N(pg_mean, pg_variance), floored at 1e-12.

    Intended for ``b >= 20``; for small ``b`` the floor can be hit.
    """
    return _draw_many(b, c, 1, rng, size)


def pg_sample(b, c, threshold=DEFAULT_THRESHOLD, rng=None, size=None):
    """Exact sampler when ``b < threshold``, Gaussian approximation otherwise."""
    if threshold < 1:
        raise ValueError("threshold must be >= 1")
    threshold = _NEVER if np.isinf(threshold) else int(threshold)
    return _draw_many(b, c, threshold, rng, size)


def pg_draw_count(K, V, T, total_docs):
    """Number of PG variates per sweep: one per (k, v, t) and one per (d, k, t)."""
    return K * (V * T + total_docs)


# --------------------------------------------------------------------------
# Benchmark
# --------------------------------------------------------------------------


@dataclass
class BenchRow:
    method: str
    replications: int
    elapsed: float
    relative: float


def pg_bench(n=1000, b_rate=150.0, c_sd=1.0, replications=100, seed=0, threshold=None):
    """Time ``replications`` batches of ``n`` PG(b_i, c_i) draws per method.

    ``b_i ~ Poisson(b_rate)`` (floored at 1) and ``c_i ~ N(0, c_sd^2)``. With
    ``threshold`` set, the exact/Gaussian dispatch is timed as a third method.
    Rows are sorted fastest first; ``relative`` is elapsed over the fastest.
    """
    if n < 1 or replications < 1:
        raise ValueError("n and replications must be >= 1")
    rng = np.random.default_rng(seed)
    b = np.maximum(rng.poisson(b_rate, size=n), 1)
    c = rng.normal(0.0, c_sd, size=n)
    methods = {"exact-additive": pg_sample_exact, "gaussian": pg_sample_gaussian}
    if threshold is not None:
        methods[f"dispatch-{threshold:g}"] = lambda b, c, r: pg_sample(b, c, threshold, r)
    for fn in methods.values():  # JIT warm-up
        fn(b[:2], c[:2], rng)
    elapsed = {}
    for name, fn in methods.items():
        t0 = time.perf_counter()
        for _ in range(replications):
            fn(b, c, rng)
        elapsed[name] = time.perf_counter() - t0
    fastest = min(elapsed.values())
    rows = [BenchRow(name, replications, e, e / fastest) for name, e in elapsed.items()]
    return sorted(rows, key=lambda r: r.elapsed)


def bench_csv(rows):
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["method", "replications", "elapsed", "relative"])
    for r in rows:
        w.writerow([r.method, r.replications, f"{r.elapsed:.6f}", f"{r.relative:.2f}"])
    return buf.getvalue()
