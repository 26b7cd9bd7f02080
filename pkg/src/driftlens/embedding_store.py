"""Time-sliced embedding snapshots: loading, saving, normalization, vocab overlap.

A :class:`Snapshot` is immutable once built. Rows that are entirely zero in
the source file follow the HistWords convention for "word not attested this
decade": they are kept in ``vocab`` but flagged ``present=False`` and never
take part in any computation.
"""

from __future__ import annotations

import math
import re
from dataclasses import dataclass, replace
from functools import cached_property
from pathlib import Path
from typing import Iterable, Optional, Sequence

import numpy as np

from .errors import AbsentWordError, EmptyOverlapError, ParseError

FORMATS = ("word2vec-text", "tsv")
POS_TAGS = ("NOUN", "VERB", "ADJ", "ADV", "PROPER", "OTHER")

# Penn / universal tag spellings accepted in lexicon files.
_TAG_ALIASES = {
    "NN": "NOUN", "NNS": "NOUN", "N": "NOUN",
    "NNP": "PROPER", "NNPS": "PROPER", "PROPN": "PROPER", "NP": "PROPER",
    "VB": "VERB", "VBD": "VERB", "VBG": "VERB", "VBN": "VERB", "VBP": "VERB", "VBZ": "VERB", "V": "VERB",
    "JJ": "ADJ", "JJR": "ADJ", "JJS": "ADJ", "A": "ADJ",
    "RB": "ADV", "RBR": "ADV", "RBS": "ADV", "R": "ADV",
}


def format_float(x: float) -> str:
    """Serialize with 17 significant digits (exact float round trip)."""
    return format(float(x), ".17g")


def _readonly(a: Optional[np.ndarray]) -> Optional[np.ndarray]:
    if a is None:
        return None
    a = np.array(a, copy=True)
    a.setflags(write=False)
    return a


@dataclass(frozen=True, eq=False)
class Snapshot:
    """One time slice of a diachronic embedding.

    Attributes:
        time_label: Period identifier, e.g. ``"1850"``.
        vocab: Unique words, one per matrix row.
        matrix: ``(len(vocab), dim)`` float64 array.
        present: Boolean mask; ``False`` rows are ignored everywhere.
            Defaults to "row is not all zeros".
        frequencies: Optional relative frequency per word (NaN = unknown).
        counts: Optional absolute count per word (NaN = unknown).
    """

    time_label: str
    vocab: tuple
    matrix: np.ndarray
    present: Optional[np.ndarray] = None
    frequencies: Optional[np.ndarray] = None
    counts: Optional[np.ndarray] = None

    def __post_init__(self):
        vocab = tuple(self.vocab)
        matrix = np.asarray(self.matrix, dtype=np.float64)
        if matrix.ndim != 2:
            raise ValueError(f"matrix must be 2-D, got shape {matrix.shape}")
        if matrix.shape[0] != len(vocab):
            raise ValueError(f"{matrix.shape[0]} rows for {len(vocab)} words")
        if matrix.shape[1] < 2:
            raise ValueError(f"dimension must be >= 2, got {matrix.shape[1]}")
        if len(set(vocab)) != len(vocab):
            seen = set()
            dup = next(w for w in vocab if w in seen or seen.add(w))
            raise ValueError(f"duplicate word {dup!r}")
        if not np.all(np.isfinite(matrix)):
            bad = int(np.argwhere(~np.isfinite(matrix))[0, 0])
            raise ValueError(f"non-finite value in row for {vocab[bad]!r}")

        nonzero = np.any(matrix != 0.0, axis=1)
        present = nonzero if self.present is None else np.asarray(self.present, dtype=bool) & nonzero
        if present.shape != (len(vocab),):
            raise ValueError("present mask length does not match vocab")

        object.__setattr__(self, "vocab", vocab)
        object.__setattr__(self, "time_label", str(self.time_label))
        object.__setattr__(self, "matrix", _readonly(matrix))
        object.__setattr__(self, "present", _readonly(present))
        for name in ("frequencies", "counts"):
            arr = getattr(self, name)
            if arr is not None:
                arr = np.asarray(arr, dtype=np.float64)
                if arr.shape != (len(vocab),):
                    raise ValueError(f"{name} length does not match vocab")
            object.__setattr__(self, name, _readonly(arr))

    @cached_property
    def index(self) -> dict:
        return {w: i for i, w in enumerate(self.vocab)}

    @property
    def dim(self) -> int:
        return self.matrix.shape[1]

    def __len__(self):
        return len(self.vocab)

    def __contains__(self, word) -> bool:
        i = self.index.get(word)
        return i is not None and bool(self.present[i])

    def __repr__(self):
        return (f"Snapshot(time_label={self.time_label!r}, words={len(self.vocab)}, "
                f"present={int(self.present.sum())}, dim={self.dim})")

    def present_words(self) -> list:
        return [w for w, p in zip(self.vocab, self.present) if p]

    def row_index(self, word) -> int:
        i = self.index.get(word)
        if i is None or not self.present[i]:
            raise AbsentWordError(word, self.time_label)
        return i

    def vector(self, word) -> np.ndarray:
        return self.matrix[self.row_index(word)]

    def frequency(self, word) -> float:
        if self.frequencies is None:
            return math.nan
        i = self.index.get(word)
        return math.nan if i is None else float(self.frequencies[i])

    def count(self, word) -> float:
        if self.counts is None:
            return math.nan
        i = self.index.get(word)
        return math.nan if i is None else float(self.counts[i])

    def with_matrix(self, matrix: np.ndarray) -> "Snapshot":
        """Copy with a replaced matrix; the presence mask is carried over."""
        return replace(self, matrix=matrix, present=self.present)


@dataclass(frozen=True)
class SidecarEntry:
    count: float
    relative_freq: float
    tag: Optional[str]


class PosLexicon:
    """Word -> part-of-speech tag, restricted to :data:`POS_TAGS`.

    Words listed with conflicting tags are ambiguous and map to ``OTHER``.
    Unlisted words return ``None`` ("absent").
    """

    def __init__(self, tags: Optional[dict] = None):
        self._tags = {}
        for word, tag in (tags or {}).items():
            self.add(word, tag)

    def add(self, word, tag):
        tag = normalize_tag(tag)
        old = self._tags.get(word)
        self._tags[word] = tag if old is None or old == tag else "OTHER"

    def get(self, word) -> Optional[str]:
        return self._tags.get(word)

    def __getitem__(self, word):
        return self._tags[word]

    def __contains__(self, word):
        return word in self._tags

    def __len__(self):
        return len(self._tags)

    def items(self):
        return self._tags.items()

    def counts(self) -> dict:
        out = dict.fromkeys(POS_TAGS, 0)
        for tag in self._tags.values():
            out[tag] += 1
        return out

    @classmethod
    def from_file(cls, path) -> "PosLexicon":
        """Read ``word<TAB>tag`` lines or a 4-column frequency sidecar."""
        lex = cls()
        path = Path(path)
        with open(path, encoding="utf-8") as fh:
            for lineno, line in enumerate(fh, 1):
                line = line.rstrip("\n")
                if not line.strip():
                    continue
                parts = line.split("\t")
                if len(parts) == 2:
                    word, tag = parts
                elif len(parts) == 4:
                    word, tag = parts[0], parts[3]
                else:
                    raise ParseError(path, lineno, f"expected 2 or 4 tab-separated fields, got {len(parts)}")
                if tag in ("", "NA"):
                    continue
                try:
                    lex.add(word, tag)
                except ValueError as exc:
                    raise ParseError(path, lineno, str(exc)) from None
        return lex

    def save(self, path):
        with open(path, "w", encoding="utf-8") as fh:
            for word, tag in self._tags.items():
                fh.write(f"{word}\t{tag}\n")


def normalize_tag(tag: str) -> str:
    t = tag.strip().upper()
    t = _TAG_ALIASES.get(t, t)
    if t not in POS_TAGS:
        raise ValueError(f"unknown part-of-speech tag {tag!r}")
    return t


def time_label_from_path(path) -> str:
    """Last run of digits in the file stem (``snap_1850.tsv`` -> ``"1850"``), else the stem."""
    stem = Path(path).name.split(".")[0]
    runs = re.findall(r"\d+", stem)
    return runs[-1] if runs else stem


def sidecar_path(path) -> Path:
    path = Path(path)
    return path.with_name(path.name.split(".")[0] + ".freq.tsv")


def _parse_float(tok, path, lineno):
    try:
        v = float(tok)
    except ValueError:
        raise ParseError(path, lineno, f"not a number: {tok!r}") from None
    if not math.isfinite(v):
        raise ParseError(path, lineno, f"non-finite value {tok!r}")
    return v


def _detect_format(path) -> str:
    with open(path, encoding="utf-8") as fh:
        first = fh.readline()
    if "\t" in first:
        return "tsv"
    parts = first.split()
    if len(parts) == 2 and all(p.isdigit() for p in parts):
        return "word2vec-text"
    raise ParseError(path, 1, "cannot infer format; pass format explicitly")


def load_snapshot(path, format: Optional[str] = None, time_label: Optional[str] = None,
                  sidecar="auto") -> Snapshot:
    """Read a snapshot from word2vec text or TSV.

    ``sidecar`` may be a path, ``None``, or ``"auto"`` (use ``<stem>.freq.tsv``
    next to the file when it exists). Parse failures raise :class:`ParseError`
    naming the offending line.
    """
    path = Path(path)
    fmt = format or _detect_format(path)
    if fmt not in FORMATS:
        raise ValueError(f"unknown format {fmt!r}; expected one of {FORMATS}")

    words, rows = [], []
    seen = {}
    dim = None
    with open(path, encoding="utf-8") as fh:
        lines = iter(enumerate(fh, 1))
        expected_n = None
        if fmt == "word2vec-text":
            try:
                _, header = next(lines)
            except StopIteration:
                raise ParseError(path, 1, "empty file") from None
            parts = header.split()
            if len(parts) != 2 or not all(p.isdigit() for p in parts):
                raise ParseError(path, 1, f"bad header {header.strip()!r}; expected '<vocab_size> <dim>'")
            expected_n, dim = int(parts[0]), int(parts[1])
        for lineno, line in lines:
            line = line.rstrip("\n").rstrip("\r")
            if not line.strip():
                continue
            parts = line.split("\t") if fmt == "tsv" else line.split(" ")
            if fmt == "word2vec-text":
                parts = [p for p in parts if p != ""]
            word, toks = parts[0], parts[1:]
            if dim is None:
                dim = len(toks)
            if len(toks) != dim:
                raise ParseError(path, lineno, f"dimension mismatch: expected {dim} values, got {len(toks)}")
            if word in seen:
                raise ParseError(path, lineno, f"duplicate word {word!r} (first on line {seen[word]})")
            seen[word] = lineno
            words.append(word)
            rows.append([_parse_float(t, path, lineno) for t in toks])
    if expected_n is not None and expected_n != len(words):
        raise ParseError(path, 1, f"header declares {expected_n} words, file has {len(words)}")
    if not words:
        raise ParseError(path, 1, "no vectors")
    if dim < 2:
        raise ParseError(path, 1, f"dimension must be >= 2, got {dim}")

    snap = Snapshot(
        time_label=time_label if time_label is not None else time_label_from_path(path),
        vocab=tuple(words),
        matrix=np.array(rows, dtype=np.float64),
    )
    if sidecar == "auto":
        sc = sidecar_path(path)
        sidecar = sc if sc.exists() else None
    if sidecar is not None:
        snap = attach_sidecar(snap, read_sidecar(sidecar))
    return snap


def save_snapshot(s: Snapshot, path, format: str = "tsv", sidecar: bool = True) -> Path:
    """Write ``s``; absent rows are written as zeros. Optionally writes the frequency sidecar."""
    path = Path(path)
    if format not in FORMATS:
        raise ValueError(f"unknown format {format!r}")
    sep = "\t" if format == "tsv" else " "
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        if format == "word2vec-text":
            fh.write(f"{len(s.vocab)} {s.dim}\n")
        for word, row, p in zip(s.vocab, s.matrix, s.present):
            vals = row if p else np.zeros_like(row)
            fh.write(word + sep + sep.join(format_float(v) for v in vals) + "\n")
    if sidecar and (s.frequencies is not None or s.counts is not None):
        write_sidecar(s, sidecar_path(path))
    return path


def read_sidecar(path) -> dict:
    """Parse ``word<TAB>count<TAB>relative_freq<TAB>tag``; empty or ``NA`` fields are unknown."""
    path = Path(path)
    out = {}
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, 1):
            line = line.rstrip("\n")
            if not line.strip():
                continue
            parts = line.split("\t")
            if len(parts) != 4:
                raise ParseError(path, lineno, f"expected 4 tab-separated fields, got {len(parts)}")
            word, cnt, rel, tag = parts
            vals = []
            for tok in (cnt, rel):
                vals.append(math.nan if tok in ("", "NA") else _parse_float(tok, path, lineno))
            if not math.isnan(vals[1]) and not 0.0 <= vals[1] <= 1.0:
                raise ParseError(path, lineno, f"relative frequency {vals[1]} outside [0, 1]")
            if word in out:
                raise ParseError(path, lineno, f"duplicate word {word!r}")
            out[word] = SidecarEntry(vals[0], vals[1], None if tag in ("", "NA") else tag)
    return out


def write_sidecar(s: Snapshot, path, tags: Optional[PosLexicon] = None):
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        for w in s.vocab:
            cnt, rel = s.count(w), s.frequency(w)
            tag = tags.get(w) if tags is not None else None
            fh.write("\t".join([
                w,
                "NA" if math.isnan(cnt) else format_float(cnt),
                "NA" if math.isnan(rel) else format_float(rel),
                tag or "NA",
            ]) + "\n")


def attach_sidecar(s: Snapshot, entries: dict) -> Snapshot:
    counts = np.array([entries[w].count if w in entries else math.nan for w in s.vocab])
    freqs = np.array([entries[w].relative_freq if w in entries else math.nan for w in s.vocab])
    return replace(s, present=s.present, counts=counts, frequencies=freqs)


def normalize_rows(s: Snapshot) -> Snapshot:
    """Scale every present row to unit Euclidean norm; absent rows are untouched."""
    m = np.array(s.matrix, dtype=np.float64)
    p = s.present
    norms = np.linalg.norm(m[p], axis=1)
    m[p] = m[p] / norms[:, None]
    return s.with_matrix(m)


def common_vocab(a: Snapshot, b: Snapshot, min_count: Optional[float] = None) -> list:
    """Words present in both snapshots, in ``a``'s vocab order.

    With ``min_count``, a word must have a known count ``>= min_count`` in
    both snapshots. Raises :class:`EmptyOverlapError` if nothing survives.
    """
    if min_count is not None and (a.counts is None or b.counts is None):
        raise ValueError("min_count filtering needs absolute counts (frequency sidecar)")
    out = []
    for i, w in enumerate(a.vocab):
        if not a.present[i]:
            continue
        j = b.index.get(w)
        if j is None or not b.present[j]:
            continue
        if min_count is not None and not (a.counts[i] >= min_count and b.counts[j] >= min_count):
            continue
        out.append(w)
    if not out:
        raise EmptyOverlapError(f"no common words between snapshots {a.time_label} and {b.time_label}")
    return out


def load_series(paths: Sequence, format: Optional[str] = None) -> list:
    return [load_snapshot(p, format=format) for p in paths]


def restrict(s: Snapshot, words: Iterable) -> Snapshot:
    """Sub-snapshot over ``words`` (in the given order)."""
    idx = [s.index[w] for w in words]
    return Snapshot(
        time_label=s.time_label,
        vocab=tuple(s.vocab[i] for i in idx),
        matrix=s.matrix[idx],
        present=s.present[idx],
        frequencies=None if s.frequencies is None else s.frequencies[idx],
        counts=None if s.counts is None else s.counts[idx],
    )
