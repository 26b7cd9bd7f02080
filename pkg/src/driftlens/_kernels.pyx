# cython: boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
"""Compiled inner loops; the numpy twins live in ``_fallback``."""

import numpy as np
cimport numpy as cnp
from libc.math cimport sqrt, NAN
from libc.stdlib cimport malloc, free
from libc.string cimport memset

cnp.import_array()

ctypedef cnp.int64_t i64


cdef Py_ssize_t _topk(const double[::1] sims, const unsigned char[::1] mask, Py_ssize_t exclude,
                      Py_ssize_t k, i64* out_idx, double* out_val) noexcept nogil:
    # Sorted insertion buffer. Candidates are scanned in index order and only a
    # strictly larger value moves past an existing one, so ties keep index order.
    cdef Py_ssize_t n = sims.shape[0]
    cdef Py_ssize_t i, j, filled = 0
    cdef double v
    for i in range(n):
        if not mask[i] or i == exclude:
            continue
        v = sims[i]
        if filled == k and not (v > out_val[k - 1]):
            continue
        if filled < k:
            j = filled
            filled += 1
        else:
            j = k - 1
        while j > 0 and out_val[j - 1] < v:
            out_val[j] = out_val[j - 1]
            out_idx[j] = out_idx[j - 1]
            j -= 1
        out_val[j] = v
        out_idx[j] = i
    return filled


def topk_rows(const double[:, ::1] sims, const unsigned char[::1] mask, const i64[::1] exclude, Py_ssize_t k):
    cdef Py_ssize_t m = sims.shape[0], r
    idx = np.full((m, k), -1, dtype=np.int64)
    vals = np.full((m, k), np.nan, dtype=np.float64)
    cdef i64[:, ::1] idx_v = idx
    cdef double[:, ::1] vals_v = vals
    with nogil:
        for r in range(m):
            _topk(sims[r], mask, exclude[r], k, &idx_v[r, 0], &vals_v[r, 0])
    return idx, vals


def local_change_rows(const double[:, ::1] sa, const double[:, ::1] sb,
                      const unsigned char[::1] pa, const unsigned char[::1] pb,
                      const i64[::1] queries, Py_ssize_t k):
    """Second-order cosine distance for each query row.

    ``sa[r]`` / ``sb[r]`` hold cosine similarities of query ``queries[r]`` to
    every word of the shared index space in the two slices.
    """
    cdef Py_ssize_t m = sa.shape[0], n = sa.shape[1]
    cdef Py_ssize_t r, i, na, nb, nu
    cdef i64 u, q
    cdef double x, y, xx, yy, d, acc
    cdef i64 drop
    out = np.empty(m, dtype=np.float64)
    dropped = np.zeros(m, dtype=np.int64)
    cdef double[::1] out_v = out
    cdef i64[::1] drop_v = dropped
    cdef i64* ia = <i64*> malloc(k * sizeof(i64))
    cdef i64* ib = <i64*> malloc(k * sizeof(i64))
    cdef double* va = <double*> malloc(k * sizeof(double))
    cdef double* vb = <double*> malloc(k * sizeof(double))
    cdef double* bx = <double*> malloc(2 * k * sizeof(double))
    cdef double* by = <double*> malloc(2 * k * sizeof(double))
    cdef unsigned char* seen = <unsigned char*> malloc(n if n > 0 else 1)
    if ia == NULL or ib == NULL or va == NULL or vb == NULL or bx == NULL or by == NULL or seen == NULL:
        free(ia); free(ib); free(va); free(vb); free(bx); free(by); free(seen)
        raise MemoryError()
    memset(seen, 0, n)
    try:
        with nogil:
            for r in range(m):
                q = queries[r]
                na = _topk(sa[r], pa, q, k, ia, va)
                nb = _topk(sb[r], pb, q, k, ib, vb)
                nu = 0
                drop = 0
                for i in range(na):
                    u = ia[i]
                    seen[u] = 1
                    if pb[u]:
                        bx[nu] = sa[r, u]
                        by[nu] = sb[r, u]
                        nu += 1
                    else:
                        drop += 1
                for i in range(nb):
                    u = ib[i]
                    if seen[u]:
                        continue
                    if pa[u]:
                        bx[nu] = sa[r, u]
                        by[nu] = sb[r, u]
                        nu += 1
                    else:
                        drop += 1
                for i in range(na):
                    seen[ia[i]] = 0
                drop_v[r] = drop
                xx = 0.0
                yy = 0.0
                for i in range(nu):
                    xx += bx[i] * bx[i]
                    yy += by[i] * by[i]
                if xx == 0.0 or yy == 0.0:
                    out_v[r] = NAN
                    continue
                # 1 - cos as half the squared distance of the unit vectors
                xx = sqrt(xx)
                yy = sqrt(yy)
                acc = 0.0
                for i in range(nu):
                    d = bx[i] / xx - by[i] / yy
                    acc += d * d
                out_v[r] = 0.5 * acc
    finally:
        free(ia); free(ib); free(va); free(vb); free(bx); free(by); free(seen)
    return out, dropped


def cooc_keys(const i64[::1] ids, const i64[::1] sent_starts, Py_ssize_t window, i64 vocab_size):
    """Flat keys ``a * V + b`` for every ordered in-window pair inside a sentence."""
    cdef Py_ssize_t n_sent = sent_starts.shape[0] - 1
    cdef Py_ssize_t s, i, j, lo, hi, pos = 0, cap = 0
    cdef i64 a, b
    for s in range(n_sent):
        lo = sent_starts[s]
        hi = sent_starts[s + 1]
        for i in range(lo, hi):
            cap += 2 * min(window, hi - 1 - i)
    keys = np.empty(cap, dtype=np.int64)
    cdef i64[::1] kv = keys
    with nogil:
        for s in range(n_sent):
            lo = sent_starts[s]
            hi = sent_starts[s + 1]
            for i in range(lo, hi):
                a = ids[i]
                if a < 0:
                    continue
                for j in range(i + 1, min(i + window + 1, hi)):
                    b = ids[j]
                    if b < 0:
                        continue
                    kv[pos] = a * vocab_size + b
                    kv[pos + 1] = b * vocab_size + a
                    pos += 2
    return keys[:pos]
