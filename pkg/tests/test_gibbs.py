import math

import numpy as np
import pytest

from dltm import rng as krng
from dltm.corpus import Corpus, count_statistics
from dltm.dlm import backward_sample, forward_filter
from dltm.gibbs import (
    ChainConfig,
    Hyperparams,
    PosteriorArchive,
    Sampler,
    chain_seeds,
    init_chain,
    run_chain,
    run_multi_chain,
    sweep,
)
from dltm.polya_gamma import pg_draw
from dltm.synth import SynthDesign, simulate_corpus


@pytest.fixture(scope="module")
def small():
    corpus, truth = simulate_corpus(SynthDesign(K=3, V=12, T=3, doc_rate=4, word_rate=15, seed=1))
    return corpus, truth


def _key(*args):
    return np.uint64(krng.stream_key(*args))


def _lse_excl(x, skip):
    return np.logaddexp.reduce(np.delete(x, skip))


def _perm(n, key):
    out = list(range(n))
    for i in range(n - 1, 0, -1):
        j = min(int(krng.uniform(key, i) * (i + 1)), i)
        out[i], out[j] = out[j], out[i]
    return out


def reference_sweep(state, corpus, K, hp, spec, seed, it, threshold):
    """Plain-Python sweep with the same keyed streams as the compiled kernels (coordinate mode)."""
    s = state.copy()
    stats = count_statistics(corpus, s.z, K)
    V, T = corpus.V, corpus.T
    sig2 = hp.sigma2
    for k in range(K):
        order = _perm(V - 1, _key(seed, it, krng.STEP_PERM, krng.STEP_BETA, k, 0))
        for v in order:
            lse = [_lse_excl(s.beta[k, :, t], v) for t in range(T)]
            zt = [
                pg_draw(int(stats.n_y[k, t]), s.beta[k, v, t] - lse[t], threshold, _key(seed, it, krng.STEP_ZETA, k, v, t))
                if stats.n_y[k, t] > 0 else 0.0
                for t in range(T)
            ]
            m, s2 = [], []
            m_prev, s2_prev = hp.beta0_mean, hp.beta0_var
            for t in range(T):
                rho2 = s2_prev + sig2
                kap = stats.y[k, v, t] - stats.n_y[k, t] / 2
                var = 1 / (zt[t] + 1 / rho2)
                m.append(var * (kap + zt[t] * lse[t] + m_prev / rho2))
                s2.append(var)
                m_prev, s2_prev = m[-1], var
            key = _key(seed, it, krng.STEP_BETA, k, v, 0)
            nxt = m[-1] + math.sqrt(s2[-1]) * krng.normal(key, 2 * (T - 1))
            s.beta[k, v, T - 1] = nxt
            for t in range(T - 2, -1, -1):
                prec = 1 / sig2 + 1 / s2[t]
                mt = (nxt / sig2 + m[t] / s2[t]) / prec
                nxt = mt + math.sqrt(1 / prec) * krng.normal(key, 2 * t)
                s.beta[k, v, t] = nxt
    prior = np.array([[s.alpha[k, corpus.doc_slice[d]] @ spec.F_row for k in range(K - 1)] for d in range(corpus.n_docs)])
    for d in range(corpus.n_docs):
        for k in _perm(K - 1, _key(seed, it, krng.STEP_PERM, krng.STEP_ETA, d, 0)):
            lse = _lse_excl(s.eta[d], k)
            n = int(stats.N[d])
            w = pg_draw(n, s.eta[d, k] - lse, threshold, _key(seed, it, krng.STEP_OMEGA, d, k, 0))
            lam2 = 1 / (w + 1 / hp.a2)
            q = lam2 * (stats.x[d, k] - n / 2 + w * lse + prior[d, k] / hp.a2)
            s.eta[d, k] = q + math.sqrt(lam2) * krng.normal(_key(seed, it, krng.STEP_ETA, d, k, 0), 0)
    for k in range(K - 1):
        obs = [s.eta[corpus.slice_docs(t), k] for t in range(T)]
        fm = forward_filter(spec, obs)
        s.alpha[k] = backward_sample(fm, spec, krng.keyed_generator(seed, it, krng.STEP_ALPHA, k))
    n = 0
    for d in range(corpus.n_docs):
        t = corpus.doc_slice[d]
        key = _key(seed, it, krng.STEP_Z, d, 0, 0)
        logphi = s.beta[:, :, t] - np.logaddexp.reduce(s.beta[:, :, t], axis=1, keepdims=True)
        for j, w in enumerate(corpus.words[corpus.word_offsets[d] : corpus.word_offsets[d + 1]]):
            p = np.exp(logphi[:, w] + s.eta[d])
            u = krng.uniform(key, j) * p.sum()
            s.z[n] = min(int(np.searchsorted(np.cumsum(p), u, side="right")), K - 1)
            n += 1
    return s


@pytest.mark.parametrize("threshold", [20, 2])
def test_compiled_sweep_matches_reference(small, threshold):
    corpus, _ = small
    cfg = ChainConfig(K=3, n_iter=2, thin=1, seed=4, pg_threshold=threshold)
    hp = Hyperparams()
    sampler = Sampler(corpus, cfg, hp)
    state = sampler.init_state()
    for it in (1, 2):
        expect = reference_sweep(state, corpus, 3, hp, sampler.spec, 4, it, threshold)
        sampler.sweep(state, it)
        assert np.allclose(state.beta, expect.beta, rtol=0, atol=1e-10)
        assert np.allclose(state.eta, expect.eta, rtol=0, atol=1e-10)
        assert np.allclose(state.alpha, expect.alpha, rtol=0, atol=1e-10)
        assert np.array_equal(state.z, expect.z)


def test_constraints_hold(small):
    corpus, _ = small
    cfg = ChainConfig(K=4, n_iter=5, thin=1, seed=2, trend="linear")
    s = Sampler(corpus, cfg)
    state = s.init_state()
    for it in range(1, 6):
        stats = s.sweep(state, it)
        assert np.all(state.beta[:, -1, :] == 0)
        assert np.all(state.eta[:, -1] == 0)
        assert state.alpha.shape == (3, corpus.T, 2)
        assert np.array_equal(stats.y, count_statistics(corpus, state.z, 4).y)
        assert stats.y.sum() == corpus.n_words
        assert np.all(np.isfinite(state.beta)) and np.all(np.isfinite(state.eta))


def test_single_topic_is_degenerate(small):
    corpus, _ = small
    arch = run_chain(corpus, ChainConfig(K=1, n_iter=4, thin=1, seed=0))
    assert arch.alpha.shape[1] == 0
    assert np.all(arch.eta == 0)
    assert np.allclose(arch.proportions(), 1.0)


def test_block_mode_keeps_auxiliaries(small):
    corpus, _ = small
    s = Sampler(corpus, ChainConfig(K=3, n_iter=2, thin=1, aux_refresh="block"))
    state = s.init_state()
    assert state.zeta.shape == state.beta.shape and state.omega.shape == state.eta.shape
    s.sweep(state, 1)
    assert np.all(state.zeta[:, -1] == 0) and np.all(state.zeta >= 0)


def test_same_seed_same_chain_and_parallel_matches_serial(small):
    corpus, _ = small
    cfg = ChainConfig(K=3, n_iter=6, thin=2, seed=11)
    a = run_chain(corpus, cfg)
    b = run_chain(corpus, cfg)
    c = run_chain(corpus, ChainConfig(K=3, n_iter=6, thin=2, seed=11, parallel=True, threads=2))
    d = run_chain(corpus, ChainConfig(K=3, n_iter=6, thin=2, seed=12))
    for arr in ("beta", "eta", "alpha"):
        assert np.array_equal(getattr(a, arr), getattr(b, arr))
        assert np.array_equal(getattr(a, arr), getattr(c, arr))
    assert not np.array_equal(a.beta, d.beta)
    assert a.config == c.config


def test_thinning_and_burn_in(small):
    corpus, _ = small
    arch = run_chain(corpus, ChainConfig(K=2, n_iter=3, thin=1))
    assert arch.n_samples == 3 and arch.sweeps.tolist() == [1, 2, 3]
    arch = run_chain(corpus, ChainConfig(K=2, n_iter=10, thin=3, burn_in=1))
    assert arch.sweeps.tolist() == [6, 9]


@pytest.mark.parametrize(
    "kw",
    [dict(K=0, n_iter=1), dict(K=2, n_iter=1, thin=2), dict(K=2, n_iter=4, thin=2, burn_in=2),
     dict(K=2, n_iter=1, thin=1, aux_refresh="x"), dict(K=2, n_iter=1, thin=1, seed=-1)],
)
def test_config_validation(kw):
    with pytest.raises(ValueError):
        ChainConfig(**kw)


def test_hyperparams_validation():
    with pytest.raises(ValueError):
        Hyperparams(a2=0)


def test_functional_sweep_leaves_input_untouched(small):
    corpus, _ = small
    cfg = ChainConfig(K=3, n_iter=1, thin=1, seed=3)
    s0 = init_chain(corpus, cfg)
    before = s0.copy()
    s1 = sweep(s0, corpus, cfg)
    assert np.array_equal(s0.beta, before.beta)
    assert not np.array_equal(s1.beta, s0.beta)


@pytest.mark.parametrize("fmt", ["csv", "npy"])
def test_archive_round_trip(small, tmp_path, fmt):
    corpus, _ = small
    arch = run_chain(corpus, ChainConfig(K=3, n_iter=4, thin=2, seed=5, trend="harmonic"), out=tmp_path / fmt, fmt=fmt)
    back = PosteriorArchive.load(tmp_path / fmt)
    for arr in ("beta", "eta", "alpha", "sweeps", "doc_counts"):
        assert np.array_equal(getattr(back, arr), getattr(arch, arr))
    assert back.config == arch.config and back.hyper == arch.hyper
    assert back.restrict([1]).n_samples == 1
    assert np.allclose(back.mean_topics().sum(axis=1), 1.0)


def test_csv_layout(small, tmp_path):
    corpus, _ = small
    run_chain(corpus, ChainConfig(K=2, n_iter=1, thin=1), out=tmp_path)
    header = (tmp_path / "sample_0_beta.csv").read_text().splitlines()[0]
    assert header.split(",")[:3] == ["k", "v", "t0"]
    rows = (tmp_path / "sample_0_eta.csv").read_text().splitlines()
    assert len(rows) == corpus.n_docs + 1


def test_multi_chain_seeds(small, tmp_path):
    corpus, _ = small
    seeds = chain_seeds(0, 3)
    assert len(set(seeds)) == 3 and seeds == chain_seeds(0, 3)
    chains = run_multi_chain(corpus, ChainConfig(K=2, n_iter=2, thin=1), n_chains=3, out=tmp_path)
    assert [c.seed for c in chains] == seeds
    assert sorted(p.name for p in tmp_path.iterdir()) == ["chain_0", "chain_1", "chain_2"]
    assert not np.array_equal(chains[0].beta, chains[1].beta)


def test_empty_documents_and_slices():
    corpus = Corpus.from_lists(4, [[np.array([0, 1, 1])], [], [np.array([], dtype=np.int64), np.array([3, 2])]])
    arch = run_chain(corpus, ChainConfig(K=2, n_iter=3, thin=1))
    assert np.all(np.isfinite(arch.beta)) and np.all(np.isfinite(arch.alpha))


def test_prior_draws_at_unit_inflation():
    # with no words, a sweep leaves the prior invariant; the init draw is an exact prior draw
    corpus = Corpus.from_lists(3, [[np.array([], dtype=np.int64)] * 2, [np.array([], dtype=np.int64)]])
    hp = Hyperparams()
    draws = []
    for s in range(400):
        st = init_chain(corpus, ChainConfig(K=2, n_iter=1, thin=1, seed=s, init_inflation=1.0), hp)
        draws.append(st.beta[0, 0])
    draws = np.array(draws)
    sd = np.sqrt(hp.beta0_var + hp.sigma2 * np.arange(1, 3))
    assert np.all(np.abs(draws.mean(0)) < 4 * sd / 20)
    assert np.allclose(draws.std(0), sd, rtol=0.15)
