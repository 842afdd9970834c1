"""Time-sliced bag-of-words corpora and their sufficient statistics."""

import logging
import warnings
from dataclasses import dataclass, field
from functools import cached_property
from pathlib import Path

import numpy as np

log = logging.getLogger(__name__)

MIN_DOC_LENGTH = 20


class CorpusFormatError(ValueError):
    """Malformed corpus file or record."""


class CorpusBoundsError(ValueError):
    """Word id outside the vocabulary, or slice index outside [1, T]."""


class ShortDocumentWarning(UserWarning):
    pass


@dataclass(frozen=True, eq=False)
class Corpus:
    """Documents grouped by time slice over a fixed vocabulary of ``V`` ids.

    ``docs[t]`` is the list of documents in slice ``t`` (0-based), each a 1-D
    integer array of word ids. Word order within a document carries no meaning.
    """

    V: int
    T: int
    docs: tuple = field(repr=False)

    def __post_init__(self):
        if self.T < 1:
            raise CorpusFormatError("corpus must have at least one time slice")
        if self.V < 1:
            raise CorpusFormatError("vocabulary must be nonempty")
        if len(self.docs) != self.T:
            raise CorpusFormatError(f"expected {self.T} slices, got {len(self.docs)}")
        docs = tuple(tuple(np.asarray(d, dtype=np.int64).ravel() for d in s) for s in self.docs)
        for t, s in enumerate(docs):
            for d in s:
                if d.size and (d.min() < 0 or d.max() >= self.V):
                    raise CorpusBoundsError(f"word id out of range [0, {self.V}) in slice {t}")
        object.__setattr__(self, "docs", docs)

    @classmethod
    def from_lists(cls, V, docs_by_slice):
        return cls(V=V, T=len(docs_by_slice), docs=tuple(tuple(s) for s in docs_by_slice))

    @property
    def D(self):
        """Documents per slice."""
        return np.array([len(s) for s in self.docs], dtype=np.int64)

    @property
    def n_docs(self):
        return int(self.D.sum())

    @cached_property
    def doc_slice(self):
        """Slice index of each document in global (slice-major) order."""
        return np.repeat(np.arange(self.T), self.D)

    @cached_property
    def doc_lengths(self):
        return np.array([d.size for s in self.docs for d in s], dtype=np.int64)

    @cached_property
    def doc_offsets(self):
        """Global document index of the first document of each slice (length T + 1)."""
        return np.concatenate([[0], np.cumsum(self.D)])

    @cached_property
    def word_offsets(self):
        """Start of each document in the flat word array (length n_docs + 1)."""
        return np.concatenate([[0], np.cumsum(self.doc_lengths)])

    @cached_property
    def words(self):
        flat = [d for s in self.docs for d in s]
        return np.concatenate(flat) if flat else np.zeros(0, dtype=np.int64)

    @cached_property
    def word_doc(self):
        return np.repeat(np.arange(self.n_docs), self.doc_lengths)

    @cached_property
    def word_slice(self):
        return self.doc_slice[self.word_doc]

    @property
    def n_words(self):
        return int(self.words.size)

    def slice_docs(self, t):
        """Global indices of the documents in slice ``t``."""
        return np.arange(self.doc_offsets[t], self.doc_offsets[t + 1])

    def check_lengths(self, minimum=MIN_DOC_LENGTH):
        """Warn (not fail) when documents are shorter than ``minimum`` words."""
        short = int(np.sum(self.doc_lengths < minimum))
        if short:
            warnings.warn(
                f"{short} of {self.n_docs} documents have fewer than {minimum} words; "
                "the Gaussian Polya-Gamma approximation is unreliable there",
                ShortDocumentWarning,
                stacklevel=2,
            )
        return short

    def __eq__(self, other):
        if not isinstance(other, Corpus):
            return NotImplemented
        return (
            self.V == other.V
            and self.T == other.T
            and all(
                len(a) == len(b) and all(np.array_equal(x, y) for x, y in zip(a, b))
                for a, b in zip(self.docs, other.docs)
            )
        )

    __hash__ = None


def parse_corpus(text):
    """Parse the line-oriented corpus format.

    Line 1 (after comments): ``V=<int> T=<int>``. Each further line is one
    document: ``<t> <w_1> ... <w_N>`` with ``t`` in 1..T. Blank lines and lines
    starting with ``#`` are skipped.
    """
    header = None
    docs = None
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        if header is None:
            try:
                fields = dict(tok.split("=", 1) for tok in line.split())
                V, T = int(fields["V"]), int(fields["T"])
            except (ValueError, KeyError) as exc:
                raise CorpusFormatError(f"line {lineno}: bad header {line!r}") from exc
            if T < 1:
                raise CorpusFormatError("empty corpus: T must be >= 1")
            header = (V, T)
            docs = [[] for _ in range(T)]
            continue
        try:
            toks = [int(tok) for tok in line.split()]
        except ValueError as exc:
            raise CorpusFormatError(f"line {lineno}: non-integer token") from exc
        t = toks[0]
        if not 1 <= t <= header[1]:
            raise CorpusBoundsError(f"line {lineno}: slice {t} outside [1, {header[1]}]")
        ids = np.array(toks[1:], dtype=np.int64)
        if ids.size and (ids.min() < 0 or ids.max() >= header[0]):
            raise CorpusBoundsError(f"line {lineno}: word id outside [0, {header[0]})")
        docs[t - 1].append(ids)
    if header is None:
        raise CorpusFormatError("missing header line")
    return Corpus.from_lists(header[0], docs)


def load_corpus(path):
    corpus = parse_corpus(Path(path).read_text(encoding="utf-8"))
    log.info("loaded corpus V=%d T=%d docs=%d words=%d", corpus.V, corpus.T, corpus.n_docs, corpus.n_words)
    return corpus


def format_corpus(corpus):
    """Canonical text form: header, then documents in slice order."""
    lines = [f"V={corpus.V} T={corpus.T}"]
    for t, s in enumerate(corpus.docs, 1):
        for d in s:
            lines.append(" ".join([str(t)] + [str(w) for w in d]))
    return "\n".join(lines) + "\n"


def save_corpus(corpus, path):
    Path(path).write_text(format_corpus(corpus), encoding="utf-8")


# --------------------------------------------------------------------------
# Assignments and count statistics
# --------------------------------------------------------------------------


@dataclass(frozen=True, eq=False)
class CountStatistics:
    """Sufficient statistics of (corpus, z).

    ``y[k, v, t]`` word-topic counts, ``n_y[k, t]`` topic totals, ``x[d, k]``
    document-topic counts in global document order, ``N[d]`` document lengths.
    """

    y: np.ndarray
    n_y: np.ndarray
    x: np.ndarray
    N: np.ndarray
    doc_offsets: np.ndarray

    def x_slice(self, t):
        return self.x[self.doc_offsets[t] : self.doc_offsets[t + 1]]

    def N_slice(self, t):
        return self.N[self.doc_offsets[t] : self.doc_offsets[t + 1]]


def validate_assignments(corpus, z, K):
    z = np.asarray(z)
    if z.shape != (corpus.n_words,):
        raise ValueError(f"assignments shape {z.shape} does not match corpus ({corpus.n_words} words)")
    if z.size and (z.min() < 0 or z.max() >= K):
        raise ValueError(f"assignments must lie in [0, {K})")
    return z.astype(np.int64, copy=False)


def split_assignments(corpus, z):
    """Nested (slice, document) view of a flat assignment vector."""
    out = []
    off = corpus.word_offsets
    for t in range(corpus.T):
        out.append([z[off[d] : off[d + 1]] for d in corpus.slice_docs(t)])
    return out


def count_statistics(corpus, z, K):
    z = validate_assignments(corpus, z, K)
    V, T = corpus.V, corpus.T
    flat = (z * V + corpus.words) * T + corpus.word_slice
    y = np.bincount(flat, minlength=K * V * T).reshape(K, V, T)
    n_y = y.sum(axis=1)
    x = np.bincount(corpus.word_doc * K + z, minlength=corpus.n_docs * K).reshape(corpus.n_docs, K)
    return CountStatistics(y=y, n_y=n_y, x=x, N=corpus.doc_lengths.copy(), doc_offsets=corpus.doc_offsets)
