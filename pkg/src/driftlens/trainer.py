"""Small deterministic embedding trainer: window co-occurrence, PPMI, truncated SVD.

Corpora are plain UTF-8 text with one sentence per line; context windows never
cross a line break. Intended for desk-scale corpora where SGNS training would
be overkill and non-deterministic.
"""

from __future__ import annotations

from collections import Counter
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Optional, Sequence

import numpy as np
import scipy.sparse as sp
from scipy.sparse.linalg import svds

from . import kernels
from .embedding_store import Snapshot, time_label_from_path

DENSE_SVD_LIMIT = 3000


@dataclass(frozen=True)
class CooccurrenceCounts:
    vocab: tuple
    counts: sp.csr_matrix  # symmetric, non-negative
    window: int
    total: float

    def pair(self, a, b) -> float:
        index = {w: i for i, w in enumerate(self.vocab)}
        return float(self.counts[index[a], index[b]])

    def __add__(self, other: "CooccurrenceCounts") -> "CooccurrenceCounts":
        """Merge counts from two corpus shards built over the same vocab and window."""
        if self.vocab != other.vocab or self.window != other.window:
            raise ValueError("can only merge counts with identical vocab and window")
        m = (self.counts + other.counts).tocsr()
        return CooccurrenceCounts(self.vocab, m, self.window, self.total + other.total)


def read_corpus(path) -> list:
    """Sentences as token lists: one line per sentence, whitespace tokenized."""
    with open(path, encoding="utf-8") as fh:
        return [line.split() for line in fh if line.strip()]


def _as_sentences(tokens) -> list:
    tokens = list(tokens)
    if tokens and isinstance(tokens[0], str):
        return [tokens]
    return [list(s) for s in tokens]


def build_vocab(sentences: Iterable[Sequence[str]], min_count: int = 1,
                max_size: Optional[int] = None) -> tuple:
    """Words by descending count (ties alphabetical), filtered and truncated."""
    counts = Counter(w for s in sentences for w in s)
    ranked = sorted((w for w, c in counts.items() if c >= min_count), key=lambda w: (-counts[w], w))
    return tuple(ranked[:max_size] if max_size else ranked)


def build_cooccurrence(tokens, vocab: Sequence[str], window: int, backend=None) -> CooccurrenceCounts:
    """Symmetric in-window co-occurrence counts.

    ``count[a][b]`` is the number of (position, offset) pairs with
    ``0 < |offset| <= window``, token ``a`` at the position and ``b`` at the
    offset, both in ``vocab``, inside one sentence. ``tokens`` is one token
    sequence or a list of sentences.
    """
    if window < 1:
        raise ValueError(f"window must be >= 1, got {window}")
    sentences = _as_sentences(tokens)
    if not any(sentences):
        raise ValueError("empty token stream")
    vocab = tuple(vocab)
    index = {w: i for i, w in enumerate(vocab)}
    lengths = [len(s) for s in sentences]
    ids = np.fromiter((index.get(w, -1) for s in sentences for w in s), dtype=np.int64, count=sum(lengths))
    starts = np.concatenate([[0], np.cumsum(lengths)]).astype(np.int64)
    v = len(vocab)
    keys = kernels.cooc_keys(ids, starts, window, v, backend=backend)
    if keys.size == 0:
        raise ValueError("no in-vocabulary co-occurrences (all tokens out of vocabulary?)")
    uniq, cnt = np.unique(keys, return_counts=True)
    m = sp.csr_matrix((cnt.astype(np.float64), (uniq // v, uniq % v)), shape=(v, v))
    return CooccurrenceCounts(vocab, m, window, float(cnt.sum()))


def ppmi(c: CooccurrenceCounts, cds: float = 0.75) -> sp.csr_matrix:
    """Positive PMI with the context distribution raised to ``cds``.

    ``max(0, log(p(a, b) / (p(a) * p_cds(b))))``; zero counts stay zero.
    """
    if not 0.0 < cds <= 1.0:
        raise ValueError(f"cds must be in (0, 1], got {cds}")
    m = sp.csr_matrix(c.counts, dtype=np.float64, copy=True)
    m.eliminate_zeros()
    row = np.asarray(m.sum(axis=1)).ravel()
    col = np.asarray(m.sum(axis=0)).ravel()
    col_s = col ** cds
    z = col_s.sum()
    coo = m.tocoo()
    vals = np.log(coo.data * z / (row[coo.row] * col_s[coo.col]))
    keep = vals > 0
    out = sp.csr_matrix((vals[keep], (coo.row[keep], coo.col[keep])), shape=m.shape)
    out.sort_indices()
    return out


def _sign_fix(u, vt):
    # largest-|.| entry of each left singular vector made positive
    pick = np.argmax(np.abs(u), axis=0)
    signs = np.sign(u[pick, np.arange(u.shape[1])])
    signs[signs == 0] = 1.0
    return u * signs, vt * signs[:, None]


def truncated_svd(m, dim: int, seed: int = 0) -> tuple:
    """Top-``dim`` singular triplets ``(U, S, Vt)``, descending, with a fixed sign convention."""
    n_min = min(m.shape)
    if not 1 <= dim <= n_min:
        raise ValueError(f"dim must be in [1, {n_min}], got {dim}")
    if max(m.shape) <= DENSE_SVD_LIMIT or dim >= n_min - 1:
        dense = m.toarray() if sp.issparse(m) else np.asarray(m, dtype=np.float64)
        u, s, vt = np.linalg.svd(dense, full_matrices=False)
        u, s, vt = u[:, :dim], s[:dim], vt[:dim]
    else:
        v0 = np.random.default_rng(seed).standard_normal(min(m.shape))
        u, s, vt = svds(sp.csr_matrix(m, dtype=np.float64), k=dim, v0=v0, random_state=seed)
        order = np.argsort(-s, kind="stable")
        u, s, vt = u[:, order], s[order], vt[order]
    u, vt = _sign_fix(u, vt)
    return u, s, vt


def svd_embed(m, dim: int, vocab: Sequence[str], power: float = 0.5, seed: int = 0,
              time_label: str = "0", counts: Optional[np.ndarray] = None,
              frequencies: Optional[np.ndarray] = None) -> Snapshot:
    """Embed rows of ``m`` as ``U_dim * S_dim ** power``.

    Relative frequencies default to ``counts`` normalized over the vocabulary.
    """
    if not 0.0 <= power <= 1.0:
        raise ValueError(f"power must be in [0, 1], got {power}")
    if m.shape[0] != len(vocab):
        raise ValueError("matrix rows do not match vocab")
    u, s, _ = truncated_svd(m, dim, seed=seed)
    matrix = u * (s ** power)
    if counts is not None:
        counts = np.asarray(counts, dtype=np.float64)
        if frequencies is None:
            frequencies = counts / counts.sum()
    return Snapshot(time_label=time_label, vocab=tuple(vocab), matrix=matrix, counts=counts,
                    frequencies=frequencies)


def train(corpus_path, window: int = 4, dim: int = 100, cds: float = 0.75, power: float = 0.5,
          min_count: int = 1, max_vocab: Optional[int] = None, seed: int = 0,
          time_label: Optional[str] = None, vocab: Optional[Sequence[str]] = None) -> Snapshot:
    """Corpus file to snapshot, with unigram counts and corpus-relative frequencies attached."""
    sentences = read_corpus(corpus_path)
    if vocab is None:
        vocab = build_vocab(sentences, min_count=min_count, max_size=max_vocab)
    c = build_cooccurrence(sentences, vocab, window)
    unigram = Counter(w for s in sentences for w in s)
    counts = np.array([unigram[w] for w in c.vocab], dtype=np.float64)
    label = time_label if time_label is not None else time_label_from_path(Path(corpus_path))
    return svd_embed(ppmi(c, cds), min(dim, len(c.vocab)), c.vocab, power=power, seed=seed,
                     time_label=label, counts=counts, frequencies=counts / sum(unigram.values()))
