"""Polya-Gamma Gibbs sampler for the dynamic linear topic model.

One sweep runs six steps in order:

1. beta_{k,v,1:T} by forward filtering / backward sampling, one vocabulary
   coordinate at a time in a fresh random order per topic;
2. zeta_{k,v,t} ~ PG(n^y_{k,t}, gamma_{k,v,t});
3. eta_{d,k,t} from its Gaussian conditional, topics in a fresh random order
   per document;
4. omega_{d,k,t} ~ PG(N_{d,t}, psi_{d,k,t});
5. alpha_{k,1:T} by FFBS on the DLM;
6. z_{n,d,t} from its categorical conditional.

By default (``aux_refresh="coordinate"``) the auxiliary of steps 2 and 4 is
drawn immediately before the coordinate it augments, which keeps every update
an exact conditional draw. ``aux_refresh="block"`` runs steps 2 and 4 as
separate passes after steps 1 and 3.

Every random number is addressed by ``(seed, sweep, step, unit, ...)`` through
``dltm.rng``, so results do not depend on ``parallel`` or the thread count.
"""

import json
import logging
import math
import os
import warnings
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field, fields
from pathlib import Path

import numba
import numpy as np
from numba import njit, prange

from dltm import rng as krng
from dltm.conditionals import beta_backward_moments, beta_filter_moments, eta_moments, log_softmax, log_sum_excluding, softmax
from dltm.corpus import count_statistics
from dltm.dlm import backward_sample, forward_filter, simulate_states, trend_spec
from dltm.polya_gamma import DEFAULT_THRESHOLD, pg_draw
from dltm.rng import stream_key, normal, uniform

log = logging.getLogger(__name__)

warnings.filterwarnings("ignore", message="The TBB threading layer", category=numba.NumbaWarning)

AUX_MODES = ("coordinate", "block")


@dataclass
class Hyperparams:
    """Prior settings. Defaults: sigma2 0.01, beta_0 ~ N(0, 1), a2 0.25, delta2 0.025, alpha_0 ~ N(0, 0.1)."""

    sigma2: float = 0.01
    beta0_mean: float = 0.0
    beta0_var: float = 1.0
    a2: float = 0.25
    delta2: float = 0.025
    alpha_m0: float = 0.0
    alpha_C0: float = 0.1
    discount: float | None = None

    def __post_init__(self):
        for name in ("sigma2", "beta0_var", "a2", "delta2", "alpha_C0"):
            if not getattr(self, name) > 0:
                raise ValueError(f"{name} must be positive")

    def state_space(self, trend="random_walk", omega=math.pi / 2):
        return trend_spec(trend, self.delta2, self.a2, m0=self.alpha_m0, C0=self.alpha_C0, omega=omega, discount=self.discount)


@dataclass
class ChainConfig:
    K: int
    n_iter: int
    thin: int = 100
    burn_in: int = 0
    seed: int = 0
    pg_threshold: int = DEFAULT_THRESHOLD
    parallel: bool = False
    threads: int | None = None
    trend: str = "random_walk"
    omega: float = math.pi / 2
    init_inflation: float = 4.0
    aux_refresh: str = "coordinate"

    def __post_init__(self):
        if self.K < 1:
            raise ValueError("K must be >= 1")
        if self.thin < 1 or self.n_iter < self.thin:
            raise ValueError("need n_iter >= thin >= 1")
        if not 0 <= self.burn_in < self.n_iter // self.thin:
            raise ValueError("burn_in must be smaller than the number of recorded samples")
        if self.aux_refresh not in AUX_MODES:
            raise ValueError(f"aux_refresh must be one of {AUX_MODES}")
        if self.init_inflation <= 0:
            raise ValueError("init_inflation must be positive")
        if self.seed < 0:
            raise ValueError("seed must be nonnegative")

    @property
    def n_records(self):
        return self.n_iter // self.thin

    @property
    def n_retained(self):
        return self.n_records - self.burn_in

    def echo(self):
        """Fields that determine the output (execution settings excluded)."""
        d = asdict(self)
        d.pop("parallel")
        d.pop("threads")
        return d


@dataclass
class ModelState:
    """Current sampler state. ``alpha`` has one row per free topic (K - 1)."""

    beta: np.ndarray  # (K, V, T)
    eta: np.ndarray  # (n_docs, K), column K-1 pinned at 0
    alpha: np.ndarray  # (K-1, T, p)
    z: np.ndarray  # (n_words,)
    zeta: np.ndarray | None = None  # (K, V, T), block mode only
    omega: np.ndarray | None = None  # (n_docs, K), block mode only

    def copy(self):
        return ModelState(
            *(None if getattr(self, f.name) is None else getattr(self, f.name).copy() for f in fields(self))
        )


# --------------------------------------------------------------------------
# Kernels. Each body is compiled twice: serial and with prange threads.
# --------------------------------------------------------------------------


def _permutation(n, key, out):
    for i in range(n):
        out[i] = i
    for i in range(n - 1, 0, -1):
        j = int(uniform(key, i) * (i + 1))
        if j > i:
            j = i
        tmp = out[i]
        out[i] = out[j]
        out[j] = tmp


_permutation = njit(cache=True)(_permutation)


def _beta_kernel(beta, y, ny, m0, s0sq, sig2, threshold, seed, sweep, fused, zeta_in):
    # beta, y, zeta_in are laid out (K, T, V)
    K, T, V = beta.shape
    for k in prange(K):
        perm = np.empty(V - 1, dtype=np.int64)
        _permutation(V - 1, stream_key(seed, sweep, krng.STEP_PERM, krng.STEP_BETA, k, 0), perm)
        lse = np.empty(T)
        zt = np.empty(T)
        m = np.empty(T)
        s2 = np.empty(T)
        for i in range(V - 1):
            v = perm[i]
            for t in range(T):
                lse[t] = log_sum_excluding(beta[k, t], v)
                if fused:
                    n = ny[k, t]
                    if n > 0:
                        zt[t] = pg_draw(n, beta[k, t, v] - lse[t], threshold, stream_key(seed, sweep, krng.STEP_ZETA, k, v, t))
                    else:
                        zt[t] = 0.0
                else:
                    zt[t] = zeta_in[k, t, v]
            m_prev = m0
            s2_prev = s0sq
            for t in range(T):
                kap = y[k, t, v] - 0.5 * ny[k, t]
                m[t], s2[t] = beta_filter_moments(kap, zt[t], lse[t], m_prev, s2_prev + sig2)
                m_prev = m[t]
                s2_prev = s2[t]
            key = stream_key(seed, sweep, krng.STEP_BETA, k, v, 0)
            nxt = m[T - 1] + math.sqrt(s2[T - 1]) * normal(key, 2 * (T - 1))
            beta[k, T - 1, v] = nxt
            for t in range(T - 2, -1, -1):
                mt, st = beta_backward_moments(nxt, m[t], s2[t], sig2)
                nxt = mt + math.sqrt(st) * normal(key, 2 * t)
                beta[k, t, v] = nxt


def _zeta_kernel(beta, ny, threshold, seed, sweep, zeta):
    K, T, V = beta.shape
    for k in prange(K):
        for t in range(T):
            n = ny[k, t]
            for v in range(V - 1):
                if n > 0:
                    g = beta[k, t, v] - log_sum_excluding(beta[k, t], v)
                    zeta[k, t, v] = pg_draw(n, g, threshold, stream_key(seed, sweep, krng.STEP_ZETA, k, v, t))
                else:
                    zeta[k, t, v] = 0.0
            zeta[k, t, V - 1] = 0.0


def _eta_kernel(eta, x, N, prior_mean, a2, threshold, seed, sweep, fused, omega_in):
    D, K = eta.shape
    for d in prange(D):
        perm = np.empty(K - 1, dtype=np.int64)
        _permutation(K - 1, stream_key(seed, sweep, krng.STEP_PERM, krng.STEP_ETA, d, 0), perm)
        for i in range(K - 1):
            k = perm[i]
            lse = log_sum_excluding(eta[d], k)
            if fused:
                w = pg_draw(N[d], eta[d, k] - lse, threshold, stream_key(seed, sweep, krng.STEP_OMEGA, d, k, 0))
            else:
                w = omega_in[d, k]
            q, lam2 = eta_moments(x[d, k] - 0.5 * N[d], w, lse, prior_mean[d, k], a2)
            eta[d, k] = q + math.sqrt(lam2) * normal(stream_key(seed, sweep, krng.STEP_ETA, d, k, 0), 0)


def _omega_kernel(eta, N, threshold, seed, sweep, omega):
    D, K = eta.shape
    for d in prange(D):
        for k in range(K - 1):
            psi = eta[d, k] - log_sum_excluding(eta[d], k)
            omega[d, k] = pg_draw(N[d], psi, threshold, stream_key(seed, sweep, krng.STEP_OMEGA, d, k, 0))
        omega[d, K - 1] = 0.0


def _z_kernel(z, words, word_offsets, doc_slice, logphi, eta, seed, sweep, step):
    # logphi laid out (T, V, K)
    D, K = eta.shape
    for d in prange(D):
        t = doc_slice[d]
        key = stream_key(seed, sweep, step, d, 0, 0)
        lp = np.empty(K)
        start = word_offsets[d]
        for n in range(start, word_offsets[d + 1]):
            w = words[n]
            mx = -np.inf
            for k in range(K):
                lp[k] = logphi[t, w, k] + eta[d, k]
                if lp[k] > mx:
                    mx = lp[k]
            tot = 0.0
            for k in range(K):
                lp[k] = math.exp(lp[k] - mx)
                tot += lp[k]
            u = uniform(key, n - start) * tot
            acc = 0.0
            choice = K - 1
            for k in range(K):
                acc += lp[k]
                if u < acc:
                    choice = k
                    break
            z[n] = choice


def _compile(fn):
    return njit(cache=True)(fn), njit(cache=True, parallel=True)(fn)


_BETA = _compile(_beta_kernel)
_ZETA = _compile(_zeta_kernel)
_ETA = _compile(_eta_kernel)
_OMEGA = _compile(_omega_kernel)
_Z = _compile(_z_kernel)

_EMPTY3 = np.zeros((1, 1, 1))
_EMPTY2 = np.zeros((1, 1))


def _pick(pair, parallel):
    return pair[1] if parallel else pair[0]


def set_threads(threads):
    """Bound numba's worker pool; ``None`` reads DLTM_THREADS or uses every core."""
    if threads is None:
        env = os.environ.get("DLTM_THREADS")
        threads = int(env) if env else numba.config.NUMBA_NUM_THREADS
    threads = max(1, min(int(threads), numba.config.NUMBA_NUM_THREADS))
    numba.set_num_threads(threads)
    return threads


# --------------------------------------------------------------------------
# Steps
# --------------------------------------------------------------------------


class Sampler:
    """Binds a corpus, configuration and priors; runs sweeps on a ModelState."""

    def __init__(self, corpus, config, hp=None):
        self.corpus = corpus
        self.config = config
        self.hp = hp or Hyperparams()
        self.spec = self.hp.state_space(config.trend, config.omega)
        self.K = config.K
        self.parallel = bool(config.parallel)
        self.threshold = int(config.pg_threshold)
        self.fused = config.aux_refresh == "coordinate"
        self.seed = int(config.seed)
        if self.parallel:
            set_threads(config.threads)

    # -- statistics -------------------------------------------------------

    def counts(self, state):
        return count_statistics(self.corpus, state.z, self.K)

    def prior_mean(self, alpha):
        """``F' alpha_{k,t}`` for each document and free topic, shape (n_docs, K-1)."""
        per_slice = np.einsum("ktp,p->tk", alpha, self.spec.F_row)
        return np.ascontiguousarray(per_slice[self.corpus.doc_slice])

    # -- individual steps -------------------------------------------------

    def step_beta(self, state, stats, sweep):
        if state.beta.shape[1] < 2:
            return
        hp = self.hp
        bt = np.ascontiguousarray(state.beta.transpose(0, 2, 1))
        y = np.ascontiguousarray(stats.y.transpose(0, 2, 1))
        zeta = _EMPTY3 if self.fused else np.ascontiguousarray(state.zeta.transpose(0, 2, 1))
        _pick(_BETA, self.parallel)(
            bt, y, stats.n_y, hp.beta0_mean, hp.beta0_var, hp.sigma2, self.threshold, self.seed, sweep, self.fused, zeta
        )
        state.beta[...] = bt.transpose(0, 2, 1)

    def step_zeta(self, state, stats, sweep):
        bt = np.ascontiguousarray(state.beta.transpose(0, 2, 1))
        out = np.zeros_like(bt)
        if bt.shape[2] >= 2:
            _pick(_ZETA, self.parallel)(bt, stats.n_y, self.threshold, self.seed, sweep, out)
        state.zeta = out.transpose(0, 2, 1).copy()

    def step_eta(self, state, stats, sweep):
        if self.K < 2 or state.eta.shape[0] == 0:
            return
        omega = _EMPTY2 if self.fused else state.omega
        _pick(_ETA, self.parallel)(
            state.eta, stats.x, stats.N, self.prior_mean(state.alpha), self.hp.a2, self.threshold, self.seed, sweep, self.fused, omega
        )

    def step_omega(self, state, stats, sweep):
        out = np.zeros_like(state.eta)
        if self.K >= 2 and out.shape[0]:
            _pick(_OMEGA, self.parallel)(state.eta, stats.N, self.threshold, self.seed, sweep, out)
        state.omega = out

    def step_alpha(self, state, sweep):
        corpus = self.corpus
        for k in range(self.K - 1):
            obs = [state.eta[corpus.slice_docs(t), k] for t in range(corpus.T)]
            fm = forward_filter(self.spec, obs, keep_obs_cov=False)
            state.alpha[k] = backward_sample(fm, self.spec, krng.keyed_generator(self.seed, sweep, krng.STEP_ALPHA, k))

    def step_z(self, state, sweep, step=krng.STEP_Z):
        if state.z.size == 0:
            return
        logphi = np.ascontiguousarray(log_softmax(state.beta, axis=1).transpose(2, 1, 0))
        c = self.corpus
        _pick(_Z, self.parallel)(state.z, c.words, c.word_offsets, c.doc_slice, logphi, state.eta, self.seed, sweep, step)

    # -- whole sweep ------------------------------------------------------

    def sweep(self, state, sweep, stats=None):
        """Run one six-step sweep in place; returns the refreshed count statistics."""
        if stats is None:
            stats = self.counts(state)
        self.step_beta(state, stats, sweep)
        if not self.fused:
            self.step_zeta(state, stats, sweep)
        self.step_eta(state, stats, sweep)
        if not self.fused:
            self.step_omega(state, stats, sweep)
        self.step_alpha(state, sweep)
        self.step_z(state, sweep)
        return self.counts(state)

    def init_state(self):
        """Over-dispersed draw from the generative model, then z from its conditional."""
        c, K, hp = self.corpus, self.K, self.hp
        infl = self.config.init_inflation
        rng = krng.keyed_generator(self.seed, 0, krng.STEP_INIT)
        V, T = c.V, c.T
        beta = np.empty((K, V, T))
        b = rng.normal(hp.beta0_mean, math.sqrt(infl * hp.beta0_var), size=(K, V))
        for t in range(T):
            b = b + rng.normal(0.0, math.sqrt(infl * hp.sigma2), size=(K, V))
            beta[:, :, t] = b
        beta[:, V - 1, :] = 0.0
        alpha = np.empty((K - 1, T, self.spec.p))
        for k in range(K - 1):
            alpha[k] = simulate_states(self.spec, T, rng, inflate=infl)
        eta = np.zeros((c.n_docs, K))
        if K > 1:
            eta[:, : K - 1] = self.prior_mean(alpha) + rng.normal(0.0, math.sqrt(infl * hp.a2), size=(c.n_docs, K - 1))
        state = ModelState(beta=beta, eta=eta, alpha=alpha, z=np.zeros(c.n_words, dtype=np.int64))
        self.step_z(state, 0, step=krng.STEP_INIT)
        if not self.fused:
            stats = self.counts(state)
            self.step_zeta(state, stats, 0)
            self.step_omega(state, stats, 0)
        return state


def init_chain(corpus, config, hp=None):
    return Sampler(corpus, config, hp).init_state()


def sweep(state, corpus, config, hp=None, sweep_index=1):
    """Functional form: returns a new state after one sweep."""
    new = state.copy()
    Sampler(corpus, config, hp).sweep(new, sweep_index)
    return new


# --------------------------------------------------------------------------
# Posterior archive
# --------------------------------------------------------------------------


@dataclass
class PosteriorArchive:
    """Recorded (beta, eta, alpha) samples; z, zeta and omega are never stored."""

    beta: np.ndarray  # (S, K, V, T)
    eta: np.ndarray  # (S, n_docs, K)
    alpha: np.ndarray  # (S, K-1, T, p)
    sweeps: np.ndarray  # (S,)
    doc_counts: np.ndarray  # D_t per slice
    config: dict = field(default_factory=dict)
    hyper: dict = field(default_factory=dict)
    seed: int = 0

    @property
    def n_samples(self):
        return self.beta.shape[0]

    @property
    def K(self):
        return self.beta.shape[1]

    @property
    def V(self):
        return self.beta.shape[2]

    @property
    def T(self):
        return self.beta.shape[3]

    @property
    def doc_slice(self):
        return np.repeat(np.arange(len(self.doc_counts)), self.doc_counts)

    def topics(self):
        """Per-sample topic distributions, (S, K, V, T)."""
        return softmax(self.beta, axis=2)

    def proportions(self):
        """Per-sample document topic proportions, (S, n_docs, K)."""
        return softmax(self.eta, axis=2)

    def mean_topics(self):
        return self.topics().mean(axis=0)

    def mean_proportions(self):
        return self.proportions().mean(axis=0)

    def meta(self):
        K, V, T = self.K, self.V, self.T
        return {
            "dims": {"K": K, "V": V, "T": T, "p": int(self.alpha.shape[-1]), "D": [int(d) for d in self.doc_counts]},
            "seed": int(self.seed),
            "config": self.config,
            "hyper": self.hyper,
            "sweeps": [int(s) for s in self.sweeps],
        }

    def save(self, path, fmt="csv"):
        path = Path(path)
        path.mkdir(parents=True, exist_ok=True)
        meta = self.meta()
        meta["format"] = fmt
        (path / "meta.json").write_text(json.dumps(meta, indent=2, sort_keys=True, default=json_default) + "\n")
        for i in range(self.n_samples):
            write_sample(path, i, self.beta[i], self.eta[i], self.alpha[i], self.doc_counts, fmt)
        return path

    @classmethod
    def load(cls, path):
        path = Path(path)
        meta = json.loads((path / "meta.json").read_text())
        dims = meta["dims"]
        K, V, T, p = dims["K"], dims["V"], dims["T"], dims["p"]
        D = np.array(dims["D"], dtype=np.int64)
        S = len(meta["sweeps"])
        fmt = meta.get("format", "csv")
        beta = np.empty((S, K, V, T))
        eta = np.empty((S, int(D.sum()), K))
        alpha = np.empty((S, K - 1, T, p))
        for i in range(S):
            beta[i], eta[i], alpha[i] = read_sample(path, i, K, V, T, p, D, fmt)
        return cls(beta, eta, alpha, np.array(meta["sweeps"]), D, meta["config"], meta["hyper"], meta["seed"])

    def restrict(self, samples):
        """Archive over a subset of recorded samples."""
        idx = np.asarray(samples)
        return PosteriorArchive(
            self.beta[idx], self.eta[idx], self.alpha[idx], self.sweeps[idx], self.doc_counts, self.config, self.hyper, self.seed
        )


def json_default(o):
    if isinstance(o, np.ndarray):
        return o.tolist()
    if isinstance(o, np.generic):
        return o.item()
    raise TypeError(f"cannot serialize {type(o).__name__}")


def _fmt(x):
    return format(float(x), ".17g")


def write_sample(path, idx, beta, eta, alpha, doc_counts, fmt="csv"):
    path = Path(path)
    stem = f"sample_{idx}"
    if fmt == "npy":
        np.save(path / f"{stem}_beta.npy", beta)
        np.save(path / f"{stem}_eta.npy", eta)
        np.save(path / f"{stem}_alpha.npy", alpha)
        return
    if fmt != "csv":
        raise ValueError(f"unknown archive format {fmt!r}")
    K, V, T = beta.shape
    lines = ["k,v," + ",".join(f"t{t}" for t in range(T))]
    for k in range(K):
        for v in range(V):
            lines.append(f"{k},{v}," + ",".join(_fmt(x) for x in beta[k, v]))
    (path / f"{stem}_beta.csv").write_text("\n".join(lines) + "\n")
    lines = ["t,d," + ",".join(f"k{k}" for k in range(K))]
    g = 0
    for t, n in enumerate(doc_counts):
        for d in range(n):
            lines.append(f"{t},{d}," + ",".join(_fmt(x) for x in eta[g]))
            g += 1
    (path / f"{stem}_eta.csv").write_text("\n".join(lines) + "\n")
    p = alpha.shape[-1]
    lines = ["k,j," + ",".join(f"t{t}" for t in range(T))]
    for k in range(alpha.shape[0]):
        for j in range(p):
            lines.append(f"{k},{j}," + ",".join(_fmt(x) for x in alpha[k, :, j]))
    (path / f"{stem}_alpha.csv").write_text("\n".join(lines) + "\n")


def _read_csv(file, ncols_lead):
    rows = file.read_text().splitlines()[1:]
    data = [r.split(",") for r in rows if r]
    if not data:
        return np.zeros((0, 0))
    return np.array([[float(x) for x in r[ncols_lead:]] for r in data])


def read_sample(path, idx, K, V, T, p, D, fmt="csv"):
    path = Path(path)
    stem = f"sample_{idx}"
    if fmt == "npy":
        return tuple(np.load(path / f"{stem}_{name}.npy") for name in ("beta", "eta", "alpha"))
    beta = _read_csv(path / f"{stem}_beta.csv", 2).reshape(K, V, T)
    eta = _read_csv(path / f"{stem}_eta.csv", 2).reshape(int(np.sum(D)), K)
    alpha = _read_csv(path / f"{stem}_alpha.csv", 2).reshape(K - 1, p, T).transpose(0, 2, 1)
    return beta, eta, alpha


# --------------------------------------------------------------------------
# Chains
# --------------------------------------------------------------------------


def run_chain(corpus, config, hp=None, out=None, fmt="csv", callback=None):
    """Run ``config.n_iter`` sweeps, record every ``thin``-th, drop ``burn_in`` records.

    When ``out`` is given, the archive is written there (``meta.json`` plus
    per-sample matrices).
    """
    hp = hp or Hyperparams()
    sampler = Sampler(corpus, config, hp)
    state = sampler.init_state()
    S = config.n_retained
    K, V, T, p = config.K, corpus.V, corpus.T, sampler.spec.p
    beta = np.empty((S, K, V, T))
    eta = np.empty((S, corpus.n_docs, K))
    alpha = np.empty((S, K - 1, T, p))
    sweeps = np.empty(S, dtype=np.int64)
    stats = sampler.counts(state)
    rec = 0
    for it in range(1, config.n_iter + 1):
        stats = sampler.sweep(state, it, stats)
        if it % config.thin == 0:
            if rec >= config.burn_in:
                j = rec - config.burn_in
                beta[j], eta[j], alpha[j], sweeps[j] = state.beta, state.eta, state.alpha, it
            rec += 1
        if callback is not None:
            callback(it, state)
    archive = PosteriorArchive(beta, eta, alpha, sweeps, corpus.D.copy(), config.echo(), asdict(hp), config.seed)
    if out is not None:
        archive.save(out, fmt)
    log.info("chain seed=%d finished: %d samples retained", config.seed, S)
    return archive


def chain_seeds(seed, n_chains):
    """Independent per-chain seeds spawned from one root seed."""
    return [int(s.generate_state(1, np.uint64)[0] >> np.uint64(1)) for s in np.random.SeedSequence(seed).spawn(n_chains)]


def _run_one(args):
    corpus, config, hp, out, fmt = args
    return run_chain(corpus, config, hp, out, fmt)


def run_multi_chain(corpus, config, hp=None, n_chains=5, out=None, fmt="csv", workers=1, seeds=None):
    """Independent chains with spawned seeds; optionally in worker processes.

    With ``out`` set, chain ``i`` is written to ``out/chain_<i>``.
    """
    if n_chains < 1:
        raise ValueError("n_chains must be >= 1")
    seeds = chain_seeds(config.seed, n_chains) if seeds is None else list(seeds)
    jobs = []
    for i, s in enumerate(seeds):
        cfg = ChainConfig(**{**asdict(config), "seed": s})
        dest = None if out is None else Path(out) / f"chain_{i}"
        jobs.append((corpus, cfg, hp, dest, fmt))
    if workers > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            return list(pool.map(_run_one, jobs))
    return [_run_one(j) for j in jobs]
