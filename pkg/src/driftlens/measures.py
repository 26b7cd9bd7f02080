"""Global and local-neighborhood change measures, batch scoring, standardization.

Global change is the cosine distance between a word's aligned vectors in two
slices. Local change compares two *second-order* vectors: the word's cosine
similarities, within each slice, to the union of its k nearest neighbors from
both slices. Because the local measure only uses within-slice similarities it
is unaffected by any rotation of one slice.

Cosine distance is ``1 - cosine similarity`` and lies in ``[0, 2]``.
"""

from __future__ import annotations

import csv
import math
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace
from typing import Optional, Sequence

import numpy as np

from . import kernels
from .alignment import AlignedSeries
from .embedding_store import Snapshot, format_float
from .errors import DegenerateMeasureError, ParseError
from .neighbors import check_k, nearest_neighbors, neighbor_union, unit_rows

DEFAULT_K = 25
CHUNK_ROWS = 256
TSV_COLUMNS = ("word", "t_start", "t_end", "d_global", "d_local", "z_global", "z_local", "freq")


def cos_dist(u: np.ndarray, v: np.ndarray) -> float:
    """``1 - cos(u, v)``, computed as half the squared distance of the unit vectors.

    That form is exactly zero for parallel inputs and does not cancel
    catastrophically for small distances.
    """
    nu = float(np.linalg.norm(u))
    nv = float(np.linalg.norm(v))
    if nu == 0.0 or nv == 0.0:
        raise DegenerateMeasureError("cosine distance undefined for a zero vector")
    d = np.asarray(u) / nu - np.asarray(v) / nv
    return float(np.clip(0.5 * float(d @ d), 0.0, 2.0))


def _step(series: AlignedSeries, t) -> int:
    t = series.index_of(t)
    if t + 1 >= len(series):
        raise IndexError(f"step {t} has no following snapshot")
    return t


def pair_global_change(a: Snapshot, b: Snapshot, word: str) -> float:
    return cos_dist(a.vector(word), b.vector(word))


def global_change(series: AlignedSeries, word: str, t) -> float:
    """Cosine distance between ``word``'s vectors at step ``t`` and ``t + 1``."""
    t = _step(series, t)
    return pair_global_change(series[t], series[t + 1], word)


@dataclass(frozen=True)
class SecondOrderVector:
    word: str
    time_label: str
    order: tuple
    values: np.ndarray


def second_order_vector(s: Snapshot, word: str, order: Sequence[str]) -> SecondOrderVector:
    """Cosine similarity of ``word`` to each word of ``order`` within ``s``."""
    order = tuple(order)
    if not order:
        raise ValueError("order must contain at least one word")
    if word in order:
        raise ValueError(f"order contains the query word {word!r}")
    if len(set(order)) != len(order):
        raise ValueError("order contains duplicate words")
    qi = s.row_index(word)
    idx = [s.row_index(w) for w in order]
    unit = unit_rows(s)
    values = np.clip(unit[idx] @ unit[qi], -1.0, 1.0)
    values.setflags(write=False)
    return SecondOrderVector(word=word, time_label=s.time_label, order=order, values=values)


@dataclass(frozen=True)
class LocalChange:
    distance: float
    union: tuple
    dropped: tuple
    first: SecondOrderVector
    second: SecondOrderVector


def pair_local_change_detail(a: Snapshot, b: Snapshot, word: str, k: int = DEFAULT_K) -> LocalChange:
    """Local change of ``word`` between two snapshots, with the intermediate vectors.

    Union words missing from either slice are dropped from both vectors.
    """
    a.row_index(word)
    b.row_index(word)
    na = nearest_neighbors(a, word, k)
    nb = nearest_neighbors(b, word, k)
    union = neighbor_union(na, nb)
    kept = tuple(w for w in union if w in a and w in b)
    dropped = tuple(w for w in union if not (w in a and w in b))
    if not kept:
        raise DegenerateMeasureError(f"no neighbor of {word!r} is present in both slices")
    sa = second_order_vector(a, word, kept)
    sb = second_order_vector(b, word, kept)
    if not np.any(sa.values) or not np.any(sb.values):
        raise DegenerateMeasureError(f"second-order vector of {word!r} has zero norm")
    return LocalChange(cos_dist(sa.values, sb.values), kept, dropped, sa, sb)


def pair_local_change(a: Snapshot, b: Snapshot, word: str, k: int = DEFAULT_K) -> float:
    return pair_local_change_detail(a, b, word, k).distance


def local_change(series: AlignedSeries, word: str, t, k: int = DEFAULT_K) -> float:
    """Cosine distance between ``word``'s second-order vectors at ``t`` and ``t + 1``."""
    t = _step(series, t)
    return pair_local_change(series[t], series[t + 1], word, k)


# ---------------------------------------------------------------------------
# batch scoring
# ---------------------------------------------------------------------------


@dataclass
class PairScores:
    words: list
    d_global: np.ndarray
    d_local: np.ndarray
    freq: np.ndarray
    dropped: np.ndarray
    skipped: dict


def _log_freq(s: Snapshot, idx: np.ndarray) -> np.ndarray:
    if s.frequencies is None:
        return np.full(len(idx), np.nan)
    f = s.frequencies[idx]
    with np.errstate(divide="ignore", invalid="ignore"):
        out = np.log10(f)
    out[~np.isfinite(out)] = np.nan
    return out


def _pair_space(a: Snapshot, b: Snapshot):
    vocab = list(a.vocab)
    pos = dict(a.index)
    for w in b.vocab:
        if w not in pos:
            pos[w] = len(vocab)
            vocab.append(w)
    n, d = len(vocab), a.dim
    ia = np.arange(len(a.vocab))
    ib = np.array([pos[w] for w in b.vocab], dtype=np.int64)
    ua = np.zeros((n, d))
    ub = np.zeros((n, d))
    ua[ia] = unit_rows(a)
    ub[ib] = unit_rows(b)
    pa = np.zeros(n, dtype=bool)
    pb = np.zeros(n, dtype=bool)
    pa[ia] = a.present
    pb[ib] = b.present
    a_idx = np.full(n, -1, dtype=np.int64)
    b_idx = np.full(n, -1, dtype=np.int64)
    a_idx[ia] = ia
    b_idx[ib] = np.arange(len(b.vocab))
    return vocab, ua, ub, pa, pb, a_idx, b_idx


def score_pair(a: Snapshot, b: Snapshot, k: int = DEFAULT_K, words: Optional[Sequence[str]] = None,
               min_count: Optional[float] = None, freq_mode: str = "mean",
               threads: Optional[int] = None) -> PairScores:
    """Both measures for every eligible word of one snapshot pair.

    A word is eligible when it is present in both slices, passes ``min_count``
    in both, and (if given) is listed in ``words``. Ineligible words are
    tallied in ``skipped`` rather than raising.
    """
    if a.dim != b.dim:
        raise ValueError(f"dimension mismatch: {a.dim} vs {b.dim}")
    if freq_mode not in ("mean", "start"):
        raise ValueError(f"freq_mode must be 'mean' or 'start', got {freq_mode!r}")
    check_k(a, k)
    check_k(b, k)
    if min_count is not None and (a.counts is None or b.counts is None):
        raise ValueError("min_count filtering needs absolute counts (frequency sidecar)")

    vocab, ua, ub, pa, pb, a_idx, b_idx = _pair_space(a, b)
    both = pa & pb
    skipped = {"absent": int((pa ^ pb).sum())}
    eligible = both.copy()
    if min_count is not None:
        ca = np.where(a_idx >= 0, a.counts[np.maximum(a_idx, 0)], np.nan)
        cb = np.where(b_idx >= 0, b.counts[np.maximum(b_idx, 0)], np.nan)
        with np.errstate(invalid="ignore"):
            ok = (ca >= min_count) & (cb >= min_count)
        skipped["min_count"] = int((eligible & ~ok).sum())
        eligible &= ok
    if words is not None:
        wanted = np.zeros(len(vocab), dtype=bool)
        index = {w: i for i, w in enumerate(vocab)}
        for w in words:
            i = index.get(w)
            if i is not None:
                wanted[i] = True
        skipped["not_present"] = sum(1 for w in set(words) if w not in index or not both[index[w]])
        eligible &= wanted
    queries = np.flatnonzero(eligible)

    def run(chunk):
        sa = np.clip(ua[chunk] @ ua.T, -1.0, 1.0)
        sb = np.clip(ub[chunk] @ ub.T, -1.0, 1.0)
        dl, drop = kernels.local_change_rows(sa, sb, pa, pb, chunk, k)
        diff = ua[chunk] - ub[chunk]
        dg = 0.5 * np.einsum("ij,ij->i", diff, diff)
        return dg, dl, drop

    chunks = [queries[i:i + CHUNK_ROWS] for i in range(0, len(queries), CHUNK_ROWS)]
    n_threads = threads or default_threads()
    if n_threads > 1 and len(chunks) > 1:
        with ThreadPoolExecutor(max_workers=n_threads) as pool:
            parts = list(pool.map(run, chunks))
    else:
        parts = [run(c) for c in chunks]
    if parts:
        dg = np.concatenate([p[0] for p in parts])
        dl = np.concatenate([p[1] for p in parts])
        drop = np.concatenate([p[2] for p in parts])
    else:
        dg = dl = np.empty(0)
        drop = np.empty(0, dtype=np.int64)

    bad = np.isnan(dl)
    skipped["degenerate"] = int(bad.sum())
    keep = ~bad
    queries, dg, dl, drop = queries[keep], dg[keep], dl[keep], drop[keep]

    fa = _log_freq(a, a_idx[queries])
    if freq_mode == "mean":
        freq = (fa + _log_freq(b, b_idx[queries])) / 2.0
    else:
        freq = fa
    return PairScores(
        words=[vocab[i] for i in queries],
        d_global=np.clip(dg, 0.0, 2.0),
        d_local=np.clip(dl, 0.0, 2.0),
        freq=freq,
        dropped=drop,
        skipped=skipped,
    )


def default_threads() -> int:
    try:
        return max(1, int(os.environ.get("DRIFTLENS_THREADS", "1")))
    except ValueError:
        return 1


@dataclass
class ChangeTable:
    """One row per (word, consecutive slice pair).

    ``freq`` is the log10 relative-frequency covariate (NaN when unknown).
    ``z_global`` / ``z_local`` are filled by :func:`standardize`.
    """

    word: list
    t_start: list
    t_end: list
    d_global: np.ndarray
    d_local: np.ndarray
    freq: np.ndarray
    k: int = DEFAULT_K
    z_global: Optional[np.ndarray] = None
    z_local: Optional[np.ndarray] = None
    skipped: dict = field(default_factory=dict)

    def __len__(self):
        return len(self.word)

    @property
    def standardized(self) -> bool:
        return self.z_global is not None and self.z_local is not None

    def column(self, name) -> np.ndarray:
        return np.asarray(getattr(self, name))

    def select(self, mask) -> "ChangeTable":
        mask = np.asarray(mask, dtype=bool)
        pick = lambda xs: [x for x, m in zip(xs, mask) if m]
        return replace(
            self, word=pick(self.word), t_start=pick(self.t_start), t_end=pick(self.t_end),
            d_global=self.d_global[mask], d_local=self.d_local[mask], freq=self.freq[mask],
            z_global=None if self.z_global is None else self.z_global[mask],
            z_local=None if self.z_local is None else self.z_local[mask],
        )

    def rows(self):
        zg = self.z_global if self.z_global is not None else [math.nan] * len(self)
        zl = self.z_local if self.z_local is not None else [math.nan] * len(self)
        return zip(self.word, self.t_start, self.t_end, self.d_global, self.d_local, zg, zl, self.freq)

    def to_tsv(self, path):
        fmt = lambda x: "NA" if math.isnan(x) else format_float(x)
        with open(path, "w", encoding="utf-8", newline="\n") as fh:
            fh.write("\t".join(TSV_COLUMNS) + "\n")
            for w, ts, te, dg, dl, zg, zl, fq in self.rows():
                fh.write("\t".join([w, ts, te, fmt(dg), fmt(dl), fmt(zg), fmt(zl), fmt(fq)]) + "\n")

    @classmethod
    def from_tsv(cls, path, k: int = DEFAULT_K) -> "ChangeTable":
        cols = {c: [] for c in TSV_COLUMNS}
        with open(path, encoding="utf-8", newline="") as fh:
            reader = csv.reader(fh, delimiter="\t", quoting=csv.QUOTE_NONE)
            header = next(reader, None)
            if header is None or tuple(header) != TSV_COLUMNS:
                raise ParseError(path, 1, f"expected header {TSV_COLUMNS}")
            for lineno, row in enumerate(reader, 2):
                if len(row) != len(TSV_COLUMNS):
                    raise ParseError(path, lineno, f"expected {len(TSV_COLUMNS)} fields, got {len(row)}")
                for c, v in zip(TSV_COLUMNS, row):
                    cols[c].append(v)
        num = lambda c: np.array([math.nan if v == "NA" else float(v) for v in cols[c]])
        zg, zl = num("z_global"), num("z_local")
        has_z = len(zg) > 0 and not (np.isnan(zg).all() or np.isnan(zl).all())
        return cls(word=cols["word"], t_start=cols["t_start"], t_end=cols["t_end"],
                   d_global=num("d_global"), d_local=num("d_local"), freq=num("freq"), k=k,
                   z_global=zg if has_z else None, z_local=zl if has_z else None)


def score_all(series: AlignedSeries, k: int = DEFAULT_K, words: Optional[Sequence[str]] = None,
              min_count: Optional[float] = None, freq_mode: str = "mean",
              threads: Optional[int] = None) -> ChangeTable:
    """Score every eligible word on every consecutive pair; rows sorted by (word, pair)."""
    if len(series) < 2:
        raise ValueError("need at least two snapshots")
    recs = []
    skipped = {}
    for t in range(len(series) - 1):
        a, b = series[t], series[t + 1]
        ps = score_pair(a, b, k=k, words=words, min_count=min_count, freq_mode=freq_mode, threads=threads)
        for key, v in ps.skipped.items():
            skipped[key] = skipped.get(key, 0) + v
        for i, w in enumerate(ps.words):
            recs.append((w, t, a.time_label, b.time_label, ps.d_global[i], ps.d_local[i], ps.freq[i]))
    recs.sort(key=lambda r: (r[0], r[1]))
    return ChangeTable(
        word=[r[0] for r in recs],
        t_start=[r[2] for r in recs],
        t_end=[r[3] for r in recs],
        d_global=np.array([r[4] for r in recs], dtype=np.float64),
        d_local=np.array([r[5] for r in recs], dtype=np.float64),
        freq=np.array([r[6] for r in recs], dtype=np.float64),
        k=k,
        skipped=skipped,
    )


def zscore(x: np.ndarray, name: str = "column") -> np.ndarray:
    """Population z-scores; raises on fewer than two values or zero variance."""
    x = np.asarray(x, dtype=np.float64)
    if x.size < 2:
        raise ValueError(f"standardizing {name} needs at least two rows")
    sd = x.std()
    if not sd > 0.0:
        raise DegenerateMeasureError(f"{name} has zero variance; cannot standardize")
    return (x - x.mean()) / sd


def standardize(table: ChangeTable) -> ChangeTable:
    """Pooled zero-mean, unit-variance versions of both measures; raw columns untouched."""
    return replace(table, z_global=zscore(table.d_global, "d_global"),
                   z_local=zscore(table.d_local, "d_local"))


# ---------------------------------------------------------------------------
# case studies
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class CaseStudyRow:
    word: str
    d_global: float
    d_local: float
    z_global: float
    z_local: float

    @property
    def z_diff(self) -> float:
        return self.z_local - self.z_global


@dataclass
class CaseStudyReport:
    t_start: str
    t_end: str
    k: int
    rows: list
    skipped: list
    n_reference: int

    def row(self, word) -> CaseStudyRow:
        for r in self.rows:
            if r.word == word:
                return r
        raise KeyError(word)


def _zscore_or_zero(x):
    # identical endpoints give constant columns; every word sits at the mean
    return np.zeros_like(x) if x.size < 2 or not x.std() > 0.0 else zscore(x)


def case_study(series: AlignedSeries, words: Sequence[str], t_start, t_end, k: int = DEFAULT_K,
               min_count: Optional[float] = None, threads: Optional[int] = None) -> CaseStudyReport:
    """Both measures between two (possibly distant) aligned slices for selected words.

    z-scores are taken over every eligible word at those endpoints, so
    ``z_local - z_global`` says which measure ranks the word as more changed.
    Words absent at either endpoint are listed in ``skipped``.
    """
    i, j = series.index_of(t_start), series.index_of(t_end)
    a, b = series[i], series[j]
    ps = score_pair(a, b, k=k, min_count=min_count, threads=threads)
    zg = _zscore_or_zero(ps.d_global)
    zl = _zscore_or_zero(ps.d_local)
    pos = {w: n for n, w in enumerate(ps.words)}
    rows, skipped = [], []
    for w in words:
        n = pos.get(w)
        if n is None:
            skipped.append(w)
            continue
        rows.append(CaseStudyRow(w, float(ps.d_global[n]), float(ps.d_local[n]), float(zg[n]), float(zl[n])))
    return CaseStudyReport(t_start=a.time_label, t_end=b.time_label, k=k, rows=rows,
                           skipped=skipped, n_reference=len(ps.words))
