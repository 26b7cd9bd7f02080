"""Synthetic snapshot series with planted change events and known ground truth.

Words sit around unit-norm cluster centroids. Three kinds of event can be
planted on top of the per-decade jitter:

* cultural: a word's vector is pulled onto another cluster's centroid, so its
  nearest neighbors are replaced;
* drift: a set of words is pushed along a shared direction each decade,
  projected off each word's neighbor span, so the vector moves while its
  similarities to its neighbors only shrink proportionally;
* instability: an unplanted word turns by a large angle toward a random
  direction each decade, the way rare words wander in trained embeddings.
  Its position changes a lot, its similarity profile much less.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np
from scipy.stats import rankdata

from .embedding_store import PosLexicon, Snapshot, format_float
from .neighbors import unit_rows

CHANGE_TYPES = ("none", "cultural", "drift")


@dataclass
class SynthTruth:
    """Ground truth for a generated series. Planting functions update it in place."""

    words: list
    clusters: np.ndarray  # home cluster per word
    centroids: np.ndarray  # (n_clusters, dim)
    seed: int
    change_type: dict = field(default_factory=dict)
    magnitude: dict = field(default_factory=dict)
    start: dict = field(default_factory=dict)  # first decade index at which the change is visible
    target: dict = field(default_factory=dict)  # cultural target cluster
    unstable: list = field(default_factory=list)  # (word, angle) from plant_instability
    _draws: int = 0

    def __post_init__(self):
        for w in self.words:
            self.change_type.setdefault(w, "none")

    def rng(self) -> np.random.Generator:
        """Fresh deterministic stream for the next planting call."""
        self._draws += 1
        return np.random.default_rng([self.seed, self._draws])

    def cluster_of(self, word) -> int:
        return int(self.clusters[self.words.index(word)])

    def of_type(self, kind) -> list:
        return [w for w in self.words if self.change_type[w] == kind]

    def _mark(self, word, kind, magnitude, start):
        old = self.change_type[word]
        if old != "none" and old != kind:
            raise ValueError(f"{word!r} is already planted as {old}")
        self.change_type[word] = kind
        self.magnitude[word] = float(magnitude)
        self.start[word] = int(start)

    def to_tsv(self, path, labels: Optional[Sequence[str]] = None):
        """Columns: word, type, magnitude, decade (label of the first changed slice)."""
        with open(path, "w", encoding="utf-8", newline="\n") as fh:
            fh.write("word\ttype\tmagnitude\tdecade\n")
            for w in self.words:
                kind = self.change_type[w]
                if kind == "none":
                    fh.write(f"{w}\tnone\t0\tNA\n")
                    continue
                t = self.start[w]
                fh.write(f"{w}\t{kind}\t{format_float(self.magnitude[w])}\t"
                         f"{labels[t] if labels is not None else t}\n")

    @staticmethod
    def read_tsv(path) -> dict:
        with open(path, encoding="utf-8", newline="") as fh:
            return {r["word"]: r for r in csv.DictReader(fh, delimiter="\t")}


def _unit(m):
    return m / np.linalg.norm(m, axis=-1, keepdims=True)


def _zipf_frequencies(n, rng):
    ranks = rng.permutation(n) + 1
    f = 1.0 / ranks
    return f / f.sum()


def generate_series(n_words: int = 500, dim: int = 50, n_clusters: int = 10, n_decades: int = 5,
                    seed: int = 0, spread: float = 0.7, jitter: float = 0.01,
                    start_year: int = 1850, year_step: int = 10, corpus_size: float = 1e7,
                    rarity: float = 0.25) -> tuple:
    """Clustered snapshots, identical across decades up to per-word jitter.

    Each word is ``normalize(centroid + spread * g)`` with ``g`` an isotropic
    Gaussian of expected norm 1. Each decade adds independent jitter of about
    ``jitter`` radians, scaled by ``(f / median f) ** -rarity`` so rarer words
    (Zipf frequencies) wobble more. All
    slices share one coordinate frame; see :func:`random_rotations`.
    """
    if n_clusters < 2:
        raise ValueError("n_clusters must be >= 2")
    if n_words < 10 * n_clusters:
        raise ValueError(f"n_words must be >= 10 * n_clusters ({10 * n_clusters})")
    if dim < 2 or n_decades < 1:
        raise ValueError("need dim >= 2 and n_decades >= 1")
    if spread <= 0 or jitter < 0:
        raise ValueError("spread must be > 0 and jitter >= 0")
    rng = np.random.default_rng(seed)
    centroids = _unit(rng.standard_normal((n_clusters, dim)))
    clusters = np.arange(n_words) % n_clusters
    rng.shuffle(clusters)
    base = _unit(centroids[clusters] + spread * rng.standard_normal((n_words, dim)) / np.sqrt(dim))
    freqs = _zipf_frequencies(n_words, rng)
    scale = jitter * (freqs / np.median(freqs)) ** -rarity
    counts = np.maximum(np.round(freqs * corpus_size), 1.0)
    words = [f"w{i:04d}" for i in range(n_words)]

    snaps = []
    for t in range(n_decades):
        noise = rng.standard_normal((n_words, dim)) / np.sqrt(dim)
        m = _unit(base + scale[:, None] * noise)
        snaps.append(Snapshot(str(start_year + year_step * t), tuple(words), m,
                              frequencies=freqs, counts=counts))
    truth = SynthTruth(words=words, clusters=clusters, centroids=centroids, seed=seed)
    return snaps, truth


def _replace_rows(s: Snapshot, rows: dict) -> Snapshot:
    m = np.array(s.matrix)
    for i, v in rows.items():
        m[i] = v
    return s.with_matrix(m)


def plant_cultural(series: Sequence[Snapshot], truth: SynthTruth, word: str, target_cluster: int,
                   mix: float, start: int = 1) -> list:
    """Blend ``word`` toward ``target_cluster``'s centroid from decade ``start`` onward."""
    if not 0.0 <= mix <= 1.0:
        raise ValueError(f"mix must be in [0, 1], got {mix}")
    if not 0 <= start < len(series):
        raise ValueError(f"start decade {start} out of range")
    home = truth.cluster_of(word)
    if target_cluster == home:
        raise ValueError(f"target cluster {target_cluster} is {word!r}'s home cluster")
    if mix == 0.0:
        return list(series)
    c = truth.centroids[target_cluster]
    out = list(series[:start])
    for s in series[start:]:
        i = s.row_index(word)
        v = (1.0 - mix) * s.matrix[i] + mix * c
        out.append(_replace_rows(s, {i: v / np.linalg.norm(v)}))
    truth._mark(word, "cultural", mix, start)
    truth.target[word] = int(target_cluster)
    return out


def _neighbor_idx(unit, i, present, k):
    sims = unit @ unit[i]
    sims[~present] = -np.inf
    sims[i] = -np.inf
    return np.argsort(-sims, kind="stable")[:k]


def _groups(idx, related):
    # connected components of the "related" relation, in first-seen order
    parent = {i: i for i in idx}

    def find(i):
        while parent[i] != i:
            parent[i] = parent[parent[i]]
            i = parent[i]
        return i

    for i in idx:
        for j in related[i]:
            parent[find(i)] = find(j)
    comps = {}
    for i in idx:
        comps.setdefault(find(i), []).append(i)
    return list(comps.values())


_DRIFT_TRIES = 24


def _free_basis(fixed, n, dim):
    qw, sv, _ = np.linalg.svd(np.concatenate(fixed).T, full_matrices=False)
    qw = qw[:, sv > 1e-10 * sv[0]]
    return qw if qw.shape[1] + n <= dim else None


def _drift_rows(unit, idx, nbs, strong, weak, extra, u, m, rng) -> dict:
    alpha = (np.sqrt(1.0 + m * m) - 1.0) / (m * m)
    rows, dirs = {}, {}
    dim = unit.shape[1]
    for group in _groups(idx, strong):
        linked = sorted({j for i in group for j in weak[i]} - set(group))
        fixed = [unit[group], unit[linked]] + [unit[nbs[i]] for i in group]
        fixed += [dirs[j][None] for j in linked if j in dirs]
        intruders = sorted(set().union(*(extra[i] for i in group)))
        qw = _free_basis(fixed + [unit[intruders]], len(group), dim)
        if qw is None:  # pinning every intruder would use up the space
            qw = _free_basis(fixed, len(group), dim)
        if qw is None:
            raise ValueError(f"no free direction left for drift group of {len(group)} words "
                             f"around word #{group[0]}; lower span or raise dim")
        basis, f = [], u
        while len(basis) < len(group):
            f = f - qw @ (qw.T @ f)
            for e in basis:
                f = f - (e @ f) * e
            norm = np.linalg.norm(f)
            if norm > 1e-6:
                basis.append(f / norm)
            f = rng.standard_normal(dim)
        gram = unit[group] @ unit[group].T
        corr = (1.0 - alpha) * np.eye(len(group)) + alpha * gram
        for i, d in zip(group, np.linalg.cholesky(corr) @ np.array(basis)):
            dirs[i] = d
            rows[i] = (unit[i] + m * d) / np.sqrt(1.0 + m * m)
    return rows


def _drift_links(unit, idx, present, k, span):
    drift = set(idx)
    nbs = {i: _neighbor_idx(unit, i, present, span) for i in idx}
    near = {i: set(nb[:k].tolist()) & drift for i, nb in nbs.items()}
    far = {i: set(nb.tolist()) & drift for i, nb in nbs.items()}
    strong = {i: [j for j in idx if j != i and (j in near[i] or i in near[j])] for i in idx}
    weak = {i: [j for j in idx if j != i and (j in far[i] or i in far[j])] for i in idx}
    return nbs, strong, weak


def select_drift_words(snapshot: Snapshot, candidates: Sequence[str], n: int, k: int = 25,
                       span: Optional[int] = None, slack: int = 4) -> list:
    """First ``n`` of ``candidates`` (in order) that :func:`plant_drift` can displace together.

    A candidate is skipped when adding it would leave some drift group with
    fewer than ``slack`` spare dimensions once its members and their
    neighbors are held fixed. Dense clusters can host only a few drift words.
    Raises ``ValueError`` if fewer than ``n`` words qualify.
    """
    span = max(span or k + 5, k)
    unit = unit_rows(snapshot)
    chosen = []
    for w in candidates:
        if len(chosen) == n:
            break
        idx = [snapshot.row_index(x) for x in chosen + [w]]
        nbs, strong, weak = _drift_links(unit, idx, snapshot.present, k, span)
        groups = _groups(idx, strong)
        touched = {idx[-1]} | set(weak[idx[-1]])
        ok = True
        for group in groups:
            if not touched & set(group):
                continue
            linked = sorted({j for i in group for j in weak[i]} - set(group))
            fixed = np.concatenate([unit[group], unit[linked]] + [unit[nbs[i]] for i in group])
            if np.linalg.matrix_rank(fixed) + len(linked) + len(group) + slack > snapshot.dim:
                ok = False
                break
        if ok:
            chosen.append(w)
    if len(chosen) < n:
        raise ValueError(f"only {len(chosen)} of {n} drift words fit; use more clusters or a larger dim")
    return chosen


def plant_drift(series: Sequence[Snapshot], truth: SynthTruth, word_set: Sequence[str], step: float,
                start: int = 1, k: int = 25, span: Optional[int] = None) -> list:
    """Displace ``word_set`` by ``step`` along a shared direction, drawn afresh each decade from ``start``.

    Every decade the words sit at ``normalize(w + step * d)`` around their
    undrifted vector ``w``, with a new shared direction each decade, so they
    keep moving between consecutive decades without wandering off.

    Drift words inside each other's k nearest neighbors form a group. A
    group's displacements live in the orthogonal complement of its members'
    vectors and their ``span`` nearest neighbors (default ``k + 5``), seeded by
    the shared direction, and are correlated so that every similarity between
    a drift word and its neighbors, drift or not, shrinks by the same factor
    ``1 / sqrt(1 + m^2)`` at displacement ``m``. Drift words that are within
    ``span`` of each other but not within k are kept mutually orthogonal, which
    only pushes them further apart. Raises ``ValueError`` naming the word if a
    k-nearest-neighbor set changes anyway.
    """
    if step < 0:
        raise ValueError("step must be >= 0")
    if not 0 <= start < len(series):
        raise ValueError(f"start decade {start} out of range")
    word_set = list(word_set)
    if step == 0.0 or not word_set:
        return list(series)
    span = max(span or k + 5, k)
    rng = truth.rng()
    out = list(series[:start])
    m = step
    for s in series[start:]:
        u = _unit(rng.standard_normal(s.dim))
        unit = unit_rows(s)
        idx = [s.row_index(w) for w in word_set]
        nbs, strong, weak = _drift_links(unit, idx, s.present, k, span)
        extra = {i: set() for i in idx}
        for attempt in range(_DRIFT_TRIES):
            # the shared direction first; fresh random seeds if that hits intruders
            seed_dir = u if attempt == 0 else _unit(rng.standard_normal(s.dim))
            rows = _drift_rows(unit, idx, nbs, strong, weak, extra, seed_dir, m, rng)
            moved = _replace_rows(s, rows)
            moved_unit = unit_rows(moved)
            bad = None
            for w, i in zip(word_set, idx):
                before = set(_neighbor_idx(unit, i, s.present, k).tolist())
                after = set(_neighbor_idx(moved_unit, i, s.present, k).tolist())
                if before != after:
                    bad = bad or w
                    extra[i] |= after - before
            if bad is None:
                break
        else:
            raise ValueError(f"drift step {step} changes the neighbor set of {bad!r} "
                             f"in slice {s.time_label}")
        out.append(moved)
    for w in word_set:
        truth._mark(w, "drift", step, start)
    return out


def plant_instability(series: Sequence[Snapshot], truth: SynthTruth, words: Sequence[str],
                      angle: float, start: int = 1) -> list:
    """Turn each of ``words`` by ``angle`` radians toward a fresh random direction every decade from ``start``.

    Models unstable words whose vectors wander without any planted change:
    the displacement is large, but being in a random direction it barely
    moves similarities to neighbors. Change types are left untouched.
    """
    if not 0 <= start < len(series):
        raise ValueError(f"start decade {start} out of range")
    if angle < 0:
        raise ValueError("angle must be >= 0")
    rng = truth.rng()
    out = list(series[:start])
    for s in series[start:]:
        unit = unit_rows(s)
        rows = {}
        for w in words:
            i = s.row_index(w)
            v = rng.standard_normal(s.dim)
            v = _unit(v - (v @ unit[i]) * unit[i])
            rows[i] = np.cos(angle) * unit[i] + np.sin(angle) * v
        out.append(_replace_rows(s, rows))
    truth.unstable.extend((w, float(angle)) for w in words)
    return out


def random_orthogonal(dim: int, rng: np.random.Generator) -> np.ndarray:
    q, r = np.linalg.qr(rng.standard_normal((dim, dim)))
    return q * np.sign(np.diag(r))


def random_rotations(series: Sequence[Snapshot], seed: int) -> list:
    """Put every slice in its own random orthogonal frame, as independently trained spaces would be."""
    rng = np.random.default_rng([seed, 7919])
    return [s.with_matrix(s.matrix @ random_orthogonal(s.dim, rng)) for s in series]


def assign_pos(truth: SynthTruth, seed: int) -> PosLexicon:
    """Cultural words are nouns, drift words verbs, the rest drawn from a fixed tag mix."""
    rng = np.random.default_rng([seed, 104729])
    tags = np.array(["NOUN", "VERB", "ADJ", "ADV", "PROPER"])
    probs = np.array([0.45, 0.35, 0.1, 0.05, 0.05])
    lex = PosLexicon()
    for w in truth.words:
        kind = truth.change_type[w]
        if kind == "cultural":
            lex.add(w, "NOUN")
        elif kind == "drift":
            lex.add(w, "VERB")
        else:
            lex.add(w, str(rng.choice(tags, p=probs)))
    return lex


@dataclass
class Scenario:
    snapshots: list
    truth: SynthTruth
    pos: PosLexicon


def make_scenario(n_words: int = 500, dim: int = 50, n_clusters: int = 16, n_decades: int = 2,
                  n_cultural: int = 10, n_drift: int = 50, mix: float = 1.0, step: float = 0.5,
                  n_unstable: int = 5, unstable_angle: float = 1.2, seed: int = 0,
                  rotate: bool = True, k: int = 25, span: Optional[int] = None, jitter: float = 0.01,
                  rarity: float = 0.25) -> Scenario:
    """Series with cultural, drift and instability events planted at random.

    Cultural words switch clusters at a random decade ``>= 1``; drift and
    instability run from decade 1. Unstable words are drawn from the
    unplanted ones. With ``rotate`` each slice gets its own random frame.
    """
    if n_cultural + n_drift + n_unstable > n_words:
        raise ValueError("more planted words than words")
    snaps, truth = generate_series(n_words, dim, n_clusters, n_decades, seed=seed, jitter=jitter,
                                   rarity=rarity)
    if n_decades < 2:
        return Scenario(snaps, truth, assign_pos(truth, seed))
    rng = np.random.default_rng([seed, 1])
    picks = [truth.words[i] for i in rng.permutation(n_words)]
    cultural, rest = picks[:n_cultural], picks[n_cultural:]
    for w in cultural:
        home = truth.cluster_of(w)
        target = int(rng.choice([c for c in range(n_clusters) if c != home]))
        snaps = plant_cultural(snaps, truth, w, target, mix, start=int(rng.integers(1, n_decades)))
    drift = sorted(select_drift_words(snaps[1], rest, n_drift, k=k, span=span)) if n_drift else []
    snaps = plant_drift(snaps, truth, drift, step, start=1, k=k, span=span)
    taken = set(drift)
    unstable = sorted([w for w in rest if w not in taken][:n_unstable])
    snaps = plant_instability(snaps, truth, unstable, unstable_angle, start=1)
    if rotate:
        snaps = random_rotations(snaps, seed)
    return Scenario(snaps, truth, assign_pos(truth, seed))


# ---------------------------------------------------------------------------
# evaluation
# ---------------------------------------------------------------------------


def auc(positive: Sequence[float], negative: Sequence[float]) -> float:
    """Probability a positive outscores a negative (ties count half); Mann-Whitney form."""
    pos = np.asarray(positive, dtype=np.float64)
    neg = np.asarray(negative, dtype=np.float64)
    if pos.size == 0 or neg.size == 0:
        raise ValueError("AUC needs at least one positive and one negative")
    ranks = rankdata(np.concatenate([pos, neg]))
    u = ranks[:pos.size].sum() - pos.size * (pos.size + 1) / 2.0
    return float(u / (pos.size * neg.size))


def row_labels(table, truth: SynthTruth, labels: Sequence[str]) -> np.ndarray:
    """Ground-truth type per change-table row; ``labels`` are the series' time labels in order.

    A cultural word counts as cultural only on the pair where its switch
    happens and is ``"other"`` elsewhere; drift rows are those from the drift
    start onward.
    """
    pos = {str(lab): i for i, lab in enumerate(labels)}
    out = []
    for w, t1 in zip(table.word, table.t_end):
        kind = truth.change_type.get(w, "none")
        t = pos[t1]
        if kind == "cultural":
            out.append("cultural" if t == truth.start[w] else "other")
        elif kind == "drift":
            out.append("drift" if t >= truth.start[w] else "other")
        else:
            out.append("none")
    return np.array(out)


def separation(table, truth: SynthTruth, labels: Sequence[str]) -> dict:
    """AUCs of each measure for cultural / drift rows against unplanted rows, plus mean z gaps."""
    lab = row_labels(table, truth, labels)
    none = lab == "none"
    out = {}
    for kind in ("cultural", "drift"):
        sel = lab == kind
        out[f"auc_local_{kind}"] = auc(table.d_local[sel], table.d_local[none])
        out[f"auc_global_{kind}"] = auc(table.d_global[sel], table.d_global[none])
        if table.standardized:
            out[f"zdiff_{kind}"] = float(np.mean(table.z_local[sel] - table.z_global[sel]))
    return out
