"""Exact cosine k-nearest-neighbor search within a single snapshot."""

from __future__ import annotations

import weakref
from dataclasses import dataclass

import numpy as np

from . import kernels
from .embedding_store import Snapshot

_unit_cache: "weakref.WeakKeyDictionary[Snapshot, np.ndarray]" = weakref.WeakKeyDictionary()


def unit_rows(s: Snapshot) -> np.ndarray:
    """Row-normalized copy of ``s.matrix`` with absent rows zeroed (cached per snapshot)."""
    u = _unit_cache.get(s)
    if u is None:
        m = np.array(s.matrix, dtype=np.float64)
        m[~s.present] = 0.0
        norms = np.linalg.norm(m, axis=1)
        norms[~s.present] = 1.0
        u = m / norms[:, None]
        u.setflags(write=False)
        _unit_cache[s] = u
    return u


@dataclass(frozen=True)
class NeighborSet:
    query: str
    time_label: str
    entries: tuple  # ((word, cosine), ...) by descending cosine

    @property
    def words(self) -> list:
        return [w for w, _ in self.entries]

    @property
    def similarities(self) -> np.ndarray:
        return np.array([v for _, v in self.entries])

    def __len__(self):
        return len(self.entries)

    def __iter__(self):
        return iter(self.entries)


def check_k(s: Snapshot, k: int):
    n_present = int(s.present.sum())
    if not 1 <= k <= n_present - 1:
        raise ValueError(
            f"k={k} out of range for snapshot {s.time_label} with {n_present} present words "
            f"(need 1 <= k <= {n_present - 1})")


def nearest_neighbors(s: Snapshot, word: str, k: int) -> NeighborSet:
    """The ``k`` present words most cosine-similar to ``word``, excluding itself.

    Ties are broken by vocabulary order.
    """
    i = s.row_index(word)
    check_k(s, k)
    unit = unit_rows(s)
    sims = unit @ unit[i]
    idx, vals = kernels.topk_rows(sims[None, :], s.present, np.array([i]), k)
    entries = tuple((s.vocab[j], float(min(1.0, max(-1.0, v)))) for j, v in zip(idx[0], vals[0]))
    return NeighborSet(query=word, time_label=s.time_label, entries=entries)


def neighbor_union(a: NeighborSet, b: NeighborSet) -> list:
    """Deduplicated union: ``a``'s words in rank order, then ``b``'s new words in rank order."""
    if a.query != b.query:
        raise ValueError(f"neighbor sets are for different words: {a.query!r} vs {b.query!r}")
    out = list(a.words)
    seen = set(out)
    out.extend(w for w in b.words if w not in seen)
    return out
