"""Orthogonal Procrustes alignment of consecutive snapshots into one frame."""

from __future__ import annotations

import warnings
from dataclasses import dataclass, field
from typing import Optional, Sequence, Union

import numpy as np

from .embedding_store import Snapshot, common_vocab, normalize_rows
from .errors import AlignmentError, DegenerateAlignmentWarning, EmptyOverlapError

_RANK_TOL = 1e-10


def procrustes(base: Snapshot, target: Snapshot, anchor_words: Sequence[str],
               center: bool = False) -> tuple:
    """Rotation ``Q`` minimizing ``||W_target Q - W_base||_F`` over the anchor rows.

    Returns ``(Q, residual)`` where ``residual`` is the root-mean-square entry
    of ``W_target Q - W_base`` on the anchors, so i.i.d. noise of scale sigma
    gives a residual of about sigma. Reflections are allowed.
    """
    if not anchor_words:
        raise EmptyOverlapError("procrustes needs at least one anchor word")
    if base.dim != target.dim:
        raise AlignmentError(f"dimension mismatch: {base.dim} vs {target.dim}")
    d = base.dim
    b = np.stack([base.vector(w) for w in anchor_words])
    t = np.stack([target.vector(w) for w in anchor_words])
    if center:
        b = b - b.mean(axis=0)
        t = t - t.mean(axis=0)
    if len(anchor_words) < d:
        warnings.warn(f"only {len(anchor_words)} anchor words for dimension {d}; rotation is under-determined",
                      DegenerateAlignmentWarning, stacklevel=2)

    u, s, vt = np.linalg.svd(t.T @ b)
    if s[-1] <= _RANK_TOL * max(s[0], 1e-300):
        warnings.warn("rank-deficient cross-covariance; rotation is not unique",
                      DegenerateAlignmentWarning, stacklevel=2)
    # deterministic sign convention: non-negative diagonal of U
    flip = np.diag(u) < 0
    u[:, flip] *= -1.0
    vt[flip, :] *= -1.0
    q = u @ vt
    resid = t @ q - b
    return q, float(np.sqrt(np.mean(resid * resid)))


@dataclass(frozen=True)
class AlignedSeries:
    """Snapshots expressed in the coordinate frame of ``snapshots[anchor_index]``.

    ``rotations[t]`` maps slice ``t`` onto slice ``t + 1``; ``transforms[t]``
    is the composed matrix actually applied to slice ``t``.
    """

    snapshots: tuple
    rotations: tuple
    transforms: tuple
    anchor_index: int
    residuals: tuple = field(default=())

    def __len__(self):
        return len(self.snapshots)

    def __getitem__(self, i) -> Snapshot:
        return self.snapshots[i]

    def __iter__(self):
        return iter(self.snapshots)

    @property
    def labels(self) -> list:
        return [s.time_label for s in self.snapshots]

    def index_of(self, label) -> int:
        if isinstance(label, (int, np.integer)) and not isinstance(label, bool):
            if not -len(self) <= label < len(self):
                raise IndexError(f"step {label} out of range for {len(self)} snapshots")
            return int(label) % len(self)
        labels = self.labels
        try:
            return labels.index(str(label))
        except ValueError:
            raise KeyError(f"no snapshot labelled {label!r}; have {labels}") from None

    @classmethod
    def unaligned(cls, snaps: Sequence[Snapshot]) -> "AlignedSeries":
        """Wrap snapshots already sharing a frame (identity transforms)."""
        snaps = tuple(snaps)
        d = snaps[0].dim
        eye = np.eye(d)
        return cls(snapshots=snaps, rotations=tuple(eye for _ in snaps[1:]),
                   transforms=tuple(eye for _ in snaps), anchor_index=len(snaps) - 1)


def align_series(snaps: Sequence[Snapshot], min_count: Optional[float] = None,
                 anchor: Union[str, int] = "last", normalize: bool = True,
                 center: bool = False) -> AlignedSeries:
    """Rotate every snapshot into the anchor slice's frame.

    Each consecutive pair is aligned on its common vocabulary (optionally
    count-filtered); the pairwise rotations are then chained toward the anchor.
    """
    snaps = list(snaps)
    if len(snaps) < 2:
        raise AlignmentError("need at least two snapshots to align")
    dims = {s.dim for s in snaps}
    if len(dims) != 1:
        raise AlignmentError(f"snapshots have different dimensions: {sorted(dims)}")
    n = len(snaps)
    a = {"last": n - 1, "first": 0}.get(anchor, anchor)
    if not isinstance(a, (int, np.integer)) or not 0 <= a < n:
        raise AlignmentError(f"bad anchor {anchor!r} for {n} snapshots")

    work = [normalize_rows(s) for s in snaps] if normalize else snaps
    rotations, residuals = [], []
    for t in range(n - 1):
        try:
            words = common_vocab(work[t], work[t + 1], min_count)
        except EmptyOverlapError:
            raise AlignmentError(
                f"no common words between snapshot {t} ({snaps[t].time_label}) and "
                f"snapshot {t + 1} ({snaps[t + 1].time_label})") from None
        q, r = procrustes(work[t + 1], work[t], words, center=center)
        rotations.append(q)
        residuals.append(r)

    d = snaps[0].dim
    transforms = [None] * n
    transforms[a] = np.eye(d)
    for t in range(a - 1, -1, -1):
        transforms[t] = rotations[t] @ transforms[t + 1]
    for t in range(a + 1, n):
        transforms[t] = rotations[t - 1].T @ transforms[t - 1]

    aligned = tuple(s.with_matrix(s.matrix @ tr) for s, tr in zip(work, transforms))
    return AlignedSeries(snapshots=aligned, rotations=tuple(rotations), transforms=tuple(transforms),
                         anchor_index=int(a), residuals=tuple(residuals))
