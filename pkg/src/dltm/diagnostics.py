"""Total-variation metrics, label alignment across chains and convergence summaries."""

import itertools
from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import linear_sum_assignment

from dltm.conditionals import softmax

EXHAUSTIVE_MAX_K = 8


def total_variation(p, q):
    """Half the L1 distance along the last axis; broadcasts over leading axes."""
    p = np.asarray(p, dtype=float)
    q = np.asarray(q, dtype=float)
    if p.shape[-1] != q.shape[-1]:
        raise ValueError(f"length mismatch: {p.shape[-1]} vs {q.shape[-1]}")
    tv = 0.5 * np.abs(p - q).sum(axis=-1)
    return float(tv) if tv.ndim == 0 else tv


def topic_overlap(p, q):
    """Complement of the total variation distance."""
    return 1.0 - total_variation(p, q)


def prior_overlap_curve(V, sigma2_grid, n_mc=1000, rng=None, chunk=None):
    """Monte Carlo E[1 - TV] between two independent N(0, s2 I) topics per grid value.

    The same standard-normal draws are scaled for every grid point, so the
    estimates along the grid share their Monte Carlo noise. ``chunk`` only
    bounds memory; the result does not depend on it.
    """
    if n_mc < 1:
        raise ValueError("n_mc must be >= 1")
    rng = np.random.default_rng(rng)
    grid = np.asarray(sigma2_grid, dtype=float)
    if np.any(grid < 0):
        raise ValueError("variances must be nonnegative")
    chunk = chunk or max(1, min(n_mc, 2_000_000 // max(V, 1)))
    total = np.zeros(grid.size)
    done = 0
    while done < n_mc:
        m = min(chunk, n_mc - done)
        x, y = np.moveaxis(rng.standard_normal((m, 2, V)), 1, 0)
        for i, s2 in enumerate(grid):
            s = np.sqrt(s2)
            total[i] += topic_overlap(softmax(s * x), softmax(s * y)).sum()
        done += m
    return total / n_mc


# --------------------------------------------------------------------------
# Relabeling
# --------------------------------------------------------------------------


def tv_cost(reference, other):
    """Matrix of TV between reference topic i and other topic j, averaged over any trailing slice axis.

    Inputs are (K, V) or (K, V, T) topic distributions; ``other`` may hold
    more topics than ``reference``.
    """
    ref = np.asarray(reference, dtype=float)
    oth = np.asarray(other, dtype=float)
    if ref.shape[1:] != oth.shape[1:]:
        raise ValueError(f"shape mismatch: {ref.shape} vs {oth.shape}")
    if ref.ndim == 2:
        ref, oth = ref[..., None], oth[..., None]
    r = np.moveaxis(ref, 1, -1)[:, None]  # (K, 1, T, V)
    o = np.moveaxis(oth, 1, -1)[None]  # (1, K', T, V)
    return total_variation(r, o).mean(axis=-1)


def optimal_assignment(cost):
    """Injective ``perm`` minimizing ``sum_i cost[i, perm[i]]``; needs rows <= columns."""
    cost = np.asarray(cost, dtype=float)
    if cost.ndim != 2 or cost.shape[0] > cost.shape[1]:
        raise ValueError("cost matrix must have at least as many columns as rows")
    K, L = cost.shape
    if L <= EXHAUSTIVE_MAX_K:
        perms = np.array(list(itertools.permutations(range(L), K)), dtype=np.int64).reshape(-1, K)
        totals = cost[np.arange(K), perms].sum(axis=1)
        return perms[int(np.argmin(totals))]
    _, cols = linear_sum_assignment(cost)
    return cols.astype(np.int64)


def relabel(reference, other):
    """``perm`` such that ``other[perm]`` lines up with ``reference`` (no label reused).

    When ``other`` has more topics, the unmatched ones are left out of ``perm``.
    """
    return optimal_assignment(tv_cost(reference, other))


# --------------------------------------------------------------------------
# Convergence report
# --------------------------------------------------------------------------


@dataclass
class ConvergenceReport:
    """TV summaries for a set of chains, all relabeled to the reference chain.

    Shapes: ``topic_mean_tv`` (K, T) max over chain pairs; ``doc_mean_tv`` (D,);
    ``across_trace`` (S, K) mean over chain pairs of per-sample TV, averaged over
    slices; ``within`` (chains, pairs, K); truth fields (chains, K, T) and
    (chains, D).
    """

    permutations: list
    topic_mean_tv: np.ndarray | None = None
    doc_mean_tv: np.ndarray | None = None
    across_trace: np.ndarray | None = None
    within: np.ndarray | None = None
    truth_topic_tv: np.ndarray | None = None
    truth_doc_tv: np.ndarray | None = None
    truth_permutations: list = field(default_factory=list)

    @property
    def topic_max_tv(self):
        return None if self.topic_mean_tv is None else self.topic_mean_tv.max(axis=1)

    def ratio(self):
        """Per-topic posterior-mean TV over the median within-chain sample TV."""
        if self.topic_mean_tv is None or self.within is None:
            return None
        med = np.median(self.within.reshape(-1, self.within.shape[-1]), axis=0)
        return self.topic_max_tv / np.where(med > 0, med, np.nan)

    def summary(self):
        def arr(x):
            return None if x is None else np.asarray(x).tolist()

        out = {
            "permutations": [list(map(int, p)) for p in self.permutations],
            "topic_max_tv": arr(self.topic_max_tv),
            "topic_mean_tv": arr(self.topic_mean_tv),
            "doc_max_tv": None if self.doc_mean_tv is None else float(self.doc_mean_tv.max(initial=0.0)),
            "doc_median_tv": None if self.doc_mean_tv is None or not self.doc_mean_tv.size else float(np.median(self.doc_mean_tv)),
            "across_final": None if self.across_trace is None else arr(self.across_trace[-1]),
            "within_median": None if self.within is None else arr(np.median(self.within.reshape(-1, self.within.shape[-1]), axis=0)),
            "ratio": arr(self.ratio()),
        }
        if self.truth_topic_tv is not None:
            out["truth_topic_tv"] = arr(self.truth_topic_tv.mean(axis=-1))
            if self.truth_doc_tv is not None:
                out["truth_doc_median_tv"] = arr(np.median(self.truth_doc_tv, axis=-1))
            out["truth_permutations"] = [list(map(int, p)) for p in self.truth_permutations]
            out["truth_note"] = "realized proportions are softmax of the true eta"
        return out


def _check_dims(archives):
    ref = archives[0]
    for a in archives[1:]:
        if (a.K, a.V, a.T) != (ref.K, ref.V, ref.T) or not np.array_equal(a.doc_counts, ref.doc_counts):
            raise ValueError("archives have mismatched dimensions")


def convergence_report(archives, truth=None, n_pairs=1000, seed=0):
    """Cross-chain and within-chain TV diagnostics.

    ``truth`` is optional and needs ``topics`` (K, V, T) and ``proportions`` (D, K).
    """
    if not archives:
        raise ValueError("need at least one archive")
    _check_dims(archives)
    topics = [a.topics() for a in archives]  # (S, K, V, T)
    props = [a.proportions() for a in archives]  # (S, D, K)
    means = [t.mean(axis=0) for t in topics]
    pmeans = [p.mean(axis=0) for p in props]
    perms = [np.arange(archives[0].K)] + [relabel(means[0], m) for m in means[1:]]
    topics = [t[:, p] for t, p in zip(topics, perms)]
    props = [q[:, :, p] for q, p in zip(props, perms)]
    means = [m[p] for m, p in zip(means, perms)]
    pmeans = [m[:, p] for m, p in zip(pmeans, perms)]

    rep = ConvergenceReport(permutations=perms)
    n = len(archives)
    pairs = list(itertools.combinations(range(n), 2))
    if pairs:
        rep.topic_mean_tv = np.max(
            [total_variation(np.moveaxis(means[i], 1, -1), np.moveaxis(means[j], 1, -1)) for i, j in pairs], axis=0
        )
        rep.doc_mean_tv = np.max([total_variation(pmeans[i], pmeans[j]) for i, j in pairs], axis=0)
        S = min(t.shape[0] for t in topics)
        rep.across_trace = np.mean(
            [total_variation(np.moveaxis(topics[i][:S], 2, -1), np.moveaxis(topics[j][:S], 2, -1)).mean(axis=-1) for i, j in pairs],
            axis=0,
        )

    within = []
    for c, t in enumerate(topics):
        S = t.shape[0]
        if S < 2:
            continue
        rng = np.random.default_rng([seed, c])
        a = rng.integers(0, S, size=n_pairs)
        b = (a + rng.integers(1, S, size=n_pairs)) % S
        within.append(total_variation(np.moveaxis(t[a], 2, -1), np.moveaxis(t[b], 2, -1)).mean(axis=-1))
    if within:
        rep.within = np.stack(within)

    if truth is not None:
        true_topics = np.asarray(truth.topics)
        true_props = np.asarray(truth.proportions)
        tt, td = [], []
        for m, pm in zip(means, pmeans):
            p = relabel(true_topics, m)
            rep.truth_permutations.append(p)
            tt.append(total_variation(np.moveaxis(true_topics, 1, -1), np.moveaxis(m[p], 1, -1)))
            if pm.shape[1] == true_props.shape[1]:
                td.append(total_variation(true_props, pm[:, p]))
        rep.truth_topic_tv = np.stack(tt)
        rep.truth_doc_tv = np.stack(td) if td else None
    return rep


def tv_to_truth(archive, truth):
    """Per-topic (K, T) and per-document (D,) TV between posterior means and truth after relabeling."""
    rep = convergence_report([archive], truth, n_pairs=1)
    return rep.truth_topic_tv[0], rep.truth_doc_tv[0]
