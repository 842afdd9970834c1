"""Keyed, counter-based random streams.

Every random draw made inside a Gibbs sweep is addressed by a key derived from
``(seed, sweep, step, unit...)`` plus a per-draw counter, so the values do not
depend on evaluation order, thread count, or vectorization. The generator is
SplitMix64 used as a hash of ``key + counter``.

Two flavours are exposed:

* ``stream_key`` / ``uniform`` / ``normal`` / ``exponential`` are numba-jitted
  scalars used inside the compiled sweep kernels;
* ``keyed_generator`` returns a ``numpy.random.Generator`` (Philox, itself
  counter based) for the coarser, vectorized numpy code paths.
"""

import math

import numpy as np
from numba import njit

_GOLDEN = np.uint64(0x9E3779B97F4A7C15)
_M1 = np.uint64(0xBF58476D1CE4E5B9)
_M2 = np.uint64(0x94D049BB133111EB)
_S30 = np.uint64(30)
_S27 = np.uint64(27)
_S31 = np.uint64(31)
_S11 = np.uint64(11)
_INV53 = 1.0 / 9007199254740992.0  # 2**-53
_TWO_PI = 2.0 * math.pi

# step codes used when keying sweep randomness
STEP_BETA = 1
STEP_ZETA = 2
STEP_ETA = 3
STEP_OMEGA = 4
STEP_ALPHA = 5
STEP_Z = 6
STEP_INIT = 7
STEP_PERM = 8


@njit(cache=True)
def mix64(x):
    """SplitMix64 finalizer applied to ``x + golden``."""
    x = x + _GOLDEN
    x = (x ^ (x >> _S30)) * _M1
    x = (x ^ (x >> _S27)) * _M2
    return x ^ (x >> _S31)


@njit(cache=True)
def fold(key, value):
    """Fold a nonnegative integer into a 64-bit key."""
    return mix64(key ^ mix64(np.uint64(value)))


@njit(cache=True)
def stream_key(seed, a, b, c, d, e):
    """Key for the unit addressed by ``(seed, a, b, c, d, e)``; pad unused slots with 0."""
    k = mix64(np.uint64(seed))
    k = fold(k, a)
    k = fold(k, b)
    k = fold(k, c)
    k = fold(k, d)
    return fold(k, e)


@njit(cache=True)
def uniform(key, ctr):
    """Uniform on the open interval (0, 1) for draw number ``ctr`` of ``key``."""
    x = mix64(key + np.uint64(ctr) * _GOLDEN)
    return (np.float64(x >> _S11) + 0.5) * _INV53


@njit(cache=True)
def normal(key, ctr):
    """Standard normal from draws ``ctr`` and ``ctr + 1`` (Box-Muller)."""
    u1 = uniform(key, ctr)
    u2 = uniform(key, ctr + 1)
    return math.sqrt(-2.0 * math.log(u1)) * math.cos(_TWO_PI * u2)


@njit(cache=True)
def exponential(key, ctr):
    return -math.log(uniform(key, ctr))


def key_from_generator(rng):
    """Draw a fresh 64-bit key from a numpy Generator."""
    return np.uint64(rng.integers(0, 2**63, dtype=np.int64))


def keyed_generator(seed, *path):
    """Philox-backed Generator for the unit addressed by ``path``.

    Distinct paths give statistically independent streams; the same path always
    gives the same stream.
    """
    path = tuple(int(p) for p in path)
    if any(p < 0 for p in path):
        raise ValueError("stream path entries must be nonnegative")
    ss = np.random.SeedSequence(int(seed), spawn_key=path)
    return np.random.Generator(np.random.Philox(ss))


def as_generator(rng):
    """Accept a Generator, an int seed, or None."""
    if isinstance(rng, np.random.Generator):
        return rng
    return np.random.default_rng(rng)
