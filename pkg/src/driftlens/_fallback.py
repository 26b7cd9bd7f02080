"""Pure numpy implementations of the compiled kernels in ``_kernels.pyx``."""

import numpy as np


def _topk_one(row, mask, exclude, k):
    cand = np.flatnonzero(mask)
    if 0 <= exclude < mask.shape[0] and mask[exclude]:
        cand = cand[cand != exclude]
    # stable sort on -sim keeps ascending index among ties
    order = np.argsort(-row[cand], kind="stable")[:k]
    return cand[order]


def topk_rows(sims, mask, exclude, k):
    sims = np.asarray(sims, dtype=np.float64)
    mask = np.asarray(mask, dtype=bool)
    m = sims.shape[0]
    idx = np.full((m, k), -1, dtype=np.int64)
    vals = np.full((m, k), np.nan)
    for r in range(m):
        top = _topk_one(sims[r], mask, int(exclude[r]), k)
        idx[r, :len(top)] = top
        vals[r, :len(top)] = sims[r, top]
    return idx, vals


def local_change_rows(sa, sb, pa, pb, queries, k):
    pa = np.asarray(pa, dtype=bool)
    pb = np.asarray(pb, dtype=bool)
    m = sa.shape[0]
    out = np.empty(m)
    dropped = np.zeros(m, dtype=np.int64)
    for r in range(m):
        q = int(queries[r])
        ia = _topk_one(sa[r], pa, q, k)
        ib = _topk_one(sb[r], pb, q, k)
        union = np.concatenate([ia, ib[~np.isin(ib, ia)]])
        keep = pa[union] & pb[union]
        dropped[r] = int((~keep).sum())
        union = union[keep]
        x = sa[r, union]
        y = sb[r, union]
        nx = np.sqrt(x @ x)
        ny = np.sqrt(y @ y)
        if nx == 0.0 or ny == 0.0:
            out[r] = np.nan
        else:
            d = x / nx - y / ny
            out[r] = 0.5 * float(d @ d)
    return out, dropped


def cooc_keys(ids, sent_starts, window, vocab_size):
    ids = np.asarray(ids, dtype=np.int64)
    n = ids.shape[0]
    sent = np.repeat(np.arange(len(sent_starts) - 1), np.diff(sent_starts))
    parts = []
    for j in range(1, window + 1):
        if j >= n:
            break
        a, b = ids[:-j], ids[j:]
        ok = (sent[:-j] == sent[j:]) & (a >= 0) & (b >= 0)
        a, b = a[ok], b[ok]
        parts.append(a * vocab_size + b)
        parts.append(b * vocab_size + a)
    if not parts:
        return np.empty(0, dtype=np.int64)
    return np.concatenate(parts)
