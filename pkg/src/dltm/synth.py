"""Truth-known synthetic corpora drawn from the generative model."""

import json
import math
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np

from dltm.conditionals import softmax
from dltm.corpus import Corpus, split_assignments
from dltm.dlm import simulate_states, trend_spec
from dltm.gibbs import PosteriorArchive, json_default


@dataclass
class SynthDesign:
    """Simulation settings.

    ``trend`` is one kind for every free topic or a list with one kind per
    free topic (K - 1). ``m0`` may be a scalar, a p-vector or a (K-1, p) array.
    """

    K: int = 3
    V: int = 1000
    T: int = 5
    doc_rate: float = 1000.0
    word_rate: float = 150.0
    trend: str | list = "random_walk"
    omega: float = math.pi / 2
    m0: float | list = 0.0
    C0: float = 0.025
    delta2: float = 0.001
    a2: float = 0.5
    sigma2: float = 0.01
    high: float = 3.0
    seed: int = 0

    def __post_init__(self):
        if self.K < 1 or self.T < 1:
            raise ValueError("K and T must be >= 1")
        if self.V < self.K:
            raise ValueError("block topics need V >= K")
        if not (self.doc_rate > 0 and self.word_rate > 0):
            raise ValueError("Poisson rates must be positive")
        for name in ("C0", "delta2", "a2", "sigma2"):
            if not getattr(self, name) > 0:
                raise ValueError(f"{name} must be positive")

    def trends(self):
        kinds = [self.trend] * (self.K - 1) if isinstance(self.trend, str) else list(self.trend)
        if len(kinds) != self.K - 1:
            raise ValueError("need one trend kind per free topic")
        return kinds

    def state_specs(self):
        specs = []
        m0 = np.asarray(self.m0, dtype=float)
        for k, kind in enumerate(self.trends()):
            mk = m0[k] if m0.ndim == 2 else m0
            specs.append(trend_spec(kind, self.delta2, self.a2, m0=mk, C0=self.C0, omega=self.omega))
        return specs


@dataclass
class GroundTruth:
    beta: np.ndarray  # (K, V, T)
    alpha: list  # per free topic, (T, p_k)
    eta: np.ndarray  # (n_docs, K)
    z: np.ndarray  # (n_words,)
    doc_counts: np.ndarray
    design: dict = field(default_factory=dict)

    @property
    def topics(self):
        """True topic distributions, (K, V, T)."""
        return softmax(self.beta, axis=1)

    @property
    def proportions(self):
        return softmax(self.eta, axis=1)

    @property
    def doc_slice(self):
        return np.repeat(np.arange(len(self.doc_counts)), self.doc_counts)

    def marginal(self):
        """Realized marginal topic curve: per-slice mean of softmax(eta), (T, K)."""
        T = len(self.doc_counts)
        props = self.proportions
        out = np.full((T, props.shape[1]), np.nan)
        sl = self.doc_slice
        for t in range(T):
            if self.doc_counts[t]:
                out[t] = props[sl == t].mean(axis=0)
        return out

    def alpha_panel(self):
        """Stack alpha paths into (K-1, T, p_max), zero-padded when state sizes differ."""
        K1 = len(self.alpha)
        T = len(self.doc_counts)
        p = max((a.shape[1] for a in self.alpha), default=1)
        out = np.zeros((K1, T, p))
        for k, a in enumerate(self.alpha):
            out[k, :, : a.shape[1]] = a
        return out

    def to_archive(self):
        return PosteriorArchive(
            self.beta[None], self.eta[None], self.alpha_panel()[None], np.zeros(1, dtype=np.int64),
            np.asarray(self.doc_counts), {"truth": True}, self.design, int(self.design.get("seed", 0)),
        )

    def save(self, path, corpus=None):
        """Write the truth as a one-sample archive plus the realized marginal and assignments."""
        path = Path(path)
        self.to_archive().save(path)
        lines = ["t,k,marginal"]
        for t, row in enumerate(self.marginal()):
            lines += [f"{t},{k},{format(float(x), '.17g')}" for k, x in enumerate(row)]
        (path / "marginal.csv").write_text("\n".join(lines) + "\n")
        (path / "design.json").write_text(json.dumps(self.design, indent=2, sort_keys=True, default=json_default) + "\n")
        if corpus is not None:
            rows = [
                " ".join([str(t + 1)] + [str(int(k)) for k in zd])
                for t, s in enumerate(split_assignments(corpus, self.z))
                for zd in s
            ]
            (path / "assignments.txt").write_text("\n".join(rows) + "\n")
        return path

    @classmethod
    def load(cls, path):
        path = Path(path)
        arc = PosteriorArchive.load(path)
        design = json.loads((path / "design.json").read_text()) if (path / "design.json").exists() else {}
        z = np.zeros(0, dtype=np.int64)
        zf = path / "assignments.txt"
        if zf.exists():
            z = np.array([int(x) for line in zf.read_text().splitlines() for x in line.split()[1:]], dtype=np.int64)
        alpha = [arc.alpha[0, k] for k in range(arc.alpha.shape[1])]
        return cls(arc.beta[0], alpha, arc.eta[0], z, arc.doc_counts, design)


def block_bounds(V, K):
    """Contiguous block edges ``round(k V / K)``; V=1000, K=3 gives 0, 333, 667, 1000."""
    if V < K:
        raise ValueError("block topics need V >= K")
    return [int(round(k * V / K)) for k in range(K + 1)]


def make_block_topics(V, K, high=3.0):
    """Natural parameters (K, V): ``high`` on topic k's block, 0 elsewhere.

    The pinned last term is set to 0 in every topic, so it is never a
    high-probability term, even for the last block.
    """
    edges = block_bounds(V, K)
    beta = np.zeros((K, V))
    for k in range(K):
        beta[k, edges[k] : edges[k + 1]] = high
    beta[:, V - 1] = 0.0
    return beta


def _poisson_positive(rng, lam, size):
    out = rng.poisson(lam, size=size)
    bad = out == 0
    while np.any(bad):
        out[bad] = rng.poisson(lam, size=int(bad.sum()))
        bad = out == 0
    return out


def simulate_corpus(design):
    """Forward-simulate a corpus; returns ``(Corpus, GroundTruth)``."""
    rng = np.random.default_rng(design.seed)
    K, V, T = design.K, design.V, design.T

    beta = np.empty((K, V, T))
    b = make_block_topics(V, K, design.high)
    for t in range(T):
        if t > 0:
            b = b + rng.normal(0.0, math.sqrt(design.sigma2), size=(K, V))
            b[:, V - 1] = 0.0
        beta[:, :, t] = b

    alpha = [simulate_states(spec, T, rng) for spec in design.state_specs()]
    F = [spec.F_row for spec in design.state_specs()]

    D = rng.poisson(design.doc_rate, size=T)
    docs = [[] for _ in range(T)]
    etas, zs = [], []
    cdf = np.cumsum(softmax(beta, axis=1), axis=1)
    for t in range(T):
        eta = np.zeros((D[t], K))
        for k in range(K - 1):
            eta[:, k] = F[k] @ alpha[k][t] + rng.normal(0.0, math.sqrt(design.a2), size=D[t])
        N = _poisson_positive(rng, design.word_rate, D[t])
        theta_cdf = np.cumsum(softmax(eta, axis=1), axis=1)
        doc_of_word = np.repeat(np.arange(D[t]), N)
        z = (rng.random(doc_of_word.size)[:, None] > theta_cdf[doc_of_word]).sum(axis=1)
        z = np.minimum(z, K - 1)
        u = rng.random(z.size)
        words = np.empty(z.size, dtype=np.int64)
        for k in range(K):
            m = z == k
            words[m] = np.searchsorted(cdf[k, :, t], u[m], side="right")
        np.minimum(words, V - 1, out=words)
        offs = np.concatenate([[0], np.cumsum(N)])
        docs[t] = [words[offs[d] : offs[d + 1]] for d in range(D[t])]
        etas.append(eta)
        zs.append(z)
    corpus = Corpus.from_lists(V, docs)
    truth = GroundTruth(
        beta=beta,
        alpha=alpha,
        eta=np.concatenate(etas) if etas else np.zeros((0, K)),
        z=np.concatenate(zs).astype(np.int64),
        doc_counts=D.astype(np.int64),
        design=asdict(design),
    )
    return corpus, truth
