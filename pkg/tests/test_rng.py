import numpy as np
import pytest
from scipy import stats

from dltm import rng as krng


def _key(*path):
    return np.uint64(krng.stream_key(*path))


def test_keys_are_deterministic_and_distinct():
    assert krng.stream_key(1, 2, 3, 4, 5, 6) == krng.stream_key(1, 2, 3, 4, 5, 6)
    keys = {int(krng.stream_key(0, s, step, k, 0, 0)) for s in range(5) for step in range(1, 9) for k in range(5)}
    assert len(keys) == 200
    # slot order matters
    assert krng.stream_key(0, 1, 2, 0, 0, 0) != krng.stream_key(0, 2, 1, 0, 0, 0)


def test_uniforms_are_uniform_and_open():
    key = _key(7, 1, 1, 1, 1, 1)
    u = np.array([krng.uniform(key, i) for i in range(20_000)])
    assert u.min() > 0 and u.max() < 1
    assert stats.kstest(u, "uniform").pvalue > 1e-4


def test_normals_and_exponentials():
    key = _key(8, 0, 0, 0, 0, 0)
    z = np.array([krng.normal(key, 2 * i) for i in range(20_000)])
    assert stats.kstest(z, "norm").pvalue > 1e-4
    e = np.array([krng.exponential(key, i) for i in range(20_000)])
    assert stats.kstest(e, "expon").pvalue > 1e-4


def test_independent_streams_are_uncorrelated():
    a = np.array([krng.uniform(_key(1, 0, 0, 0, 0, 0), i) for i in range(10_000)])
    b = np.array([krng.uniform(_key(1, 0, 0, 0, 0, 1), i) for i in range(10_000)])
    assert abs(np.corrcoef(a, b)[0, 1]) < 4 / np.sqrt(10_000)


def test_keyed_generator():
    a = krng.keyed_generator(3, 1, 2).standard_normal(5)
    b = krng.keyed_generator(3, 1, 2).standard_normal(5)
    c = krng.keyed_generator(3, 2, 1).standard_normal(5)
    assert np.array_equal(a, b) and not np.array_equal(a, c)
    with pytest.raises(ValueError):
        krng.keyed_generator(0, -1)


def test_as_generator():
    g = np.random.default_rng(0)
    assert krng.as_generator(g) is g
    assert krng.as_generator(5).random() == np.random.default_rng(5).random()
