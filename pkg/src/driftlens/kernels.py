"""Backend selection for the hot loops.

The compiled ``_kernels`` extension is used when it imports; otherwise the
numpy versions from ``_fallback`` are used. ``DRIFTLENS_PURE_PYTHON=1`` forces
the fallback. Call sites go through the module-level functions below, which
also take care of dtype/contiguity so both backends see identical inputs.
"""

import os
import types

import numpy as np

from . import _fallback

_compiled = None
if not os.environ.get("DRIFTLENS_PURE_PYTHON"):
    try:
        from . import _kernels as _compiled
    except ImportError:  # extension not built
        _compiled = None

BACKENDS = {"python": _fallback}
if _compiled is not None:
    BACKENDS["compiled"] = _compiled

BACKEND = "compiled" if _compiled is not None else "python"


def get_backend(name=None) -> types.ModuleType:
    """Kernel module by name (``"compiled"`` / ``"python"``); default is the active one."""
    name = name or BACKEND
    try:
        return BACKENDS[name]
    except KeyError:
        raise ValueError(f"kernel backend {name!r} unavailable; have {sorted(BACKENDS)}") from None


def _f64(a):
    return np.ascontiguousarray(a, dtype=np.float64)


def _u8(a):
    return np.ascontiguousarray(a, dtype=np.uint8)


def _i64(a):
    return np.ascontiguousarray(a, dtype=np.int64)


def topk_rows(sims, mask, exclude, k, backend=None):
    """Top-``k`` column indices per row of ``sims`` over ``mask``, skipping ``exclude[r]``.

    Rows are ordered by descending value, ties by ascending index. Slots
    beyond the number of candidates hold ``-1``.
    """
    return get_backend(backend).topk_rows(_f64(sims), _u8(mask), _i64(exclude), int(k))


def local_change_rows(sa, sb, pa, pb, queries, k, backend=None):
    """Local-neighborhood distances from per-query similarity rows.

    Returns ``(distances, dropped)``; a distance is NaN when a second-order
    vector has zero norm. ``dropped`` counts union words missing from one slice.
    """
    return get_backend(backend).local_change_rows(
        _f64(sa), _f64(sb), _u8(pa), _u8(pb), _i64(queries), int(k))


def cooc_keys(ids, sent_starts, window, vocab_size, backend=None):
    return get_backend(backend).cooc_keys(_i64(ids), _i64(sent_starts), int(window), int(vocab_size))
