"""Random-intercept linear mixed model relating change scores to part of speech.

Model per row ``i`` of word ``j``::

    z_ij = x_ij' beta + u_j + e_ij,   u_j ~ N(0, tau2),  e_ij ~ N(0, sigma2)

With ``gamma = tau2 / sigma2`` the covariance of word ``j``'s rows is
``sigma2 * (I + gamma * 11')`` whose inverse is ``(I - c_j 11') / sigma2`` with
``c_j = gamma / (1 + n_j gamma)``. For fixed ``gamma`` the GLS estimate of
``beta`` and the profiled ``sigma2`` are closed form, so fitting reduces to a
one-dimensional search over ``gamma``.
"""

from __future__ import annotations

import json
import math
import warnings
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .embedding_store import PosLexicon, format_float
from .errors import ConvergenceError, SingularDesignError
from .measures import ChangeTable

Z_95 = 1.96
NOUN_COLUMN = "is_noun"
VERB_SIDE = {"nounverb": ("VERB",), "extended": ("VERB", "ADJ", "ADV")}

_GOLDEN = (math.sqrt(5.0) - 1.0) / 2.0
_LOG_GRID = np.linspace(-8.0, 6.0, 57)  # log10(gamma) start grid


@dataclass
class RegressionDataset:
    y: np.ndarray
    X: np.ndarray
    columns: list
    groups: np.ndarray  # integer word id per row
    group_words: list  # word for each id
    decades: list  # decade level per row
    measure: str = "local"

    def __post_init__(self):
        if self.X.shape != (len(self.y), len(self.columns)):
            raise ValueError("design matrix shape does not match y / columns")
        if not (np.all(np.isfinite(self.X)) and np.all(np.isfinite(self.y))):
            raise ValueError("non-finite value in regression data")

    @property
    def n_rows(self) -> int:
        return len(self.y)

    @property
    def n_words(self) -> int:
        return len(np.unique(self.groups))

    def ungrouped(self) -> "RegressionDataset":
        """Same data with every row in its own group."""
        n = len(self.y)
        return RegressionDataset(self.y, self.X, list(self.columns), np.arange(n),
                                 [f"row{i}" for i in range(n)], list(self.decades), self.measure)


def _decade_key(label):
    return (0, int(label), "") if str(label).lstrip("-").isdigit() else (1, 0, str(label))


def build_design(changes: ChangeTable, pos: PosLexicon, measure: str = "local",
                 top_n: Optional[int] = 10000, mode: str = "nounverb",
                 rank_by: str = "total", use_freq: bool = True) -> RegressionDataset:
    """Regression rows for nouns vs verbs from a standardized change table.

    Columns are ``intercept``, ``is_noun``, ``log_freq`` (unless
    ``use_freq=False``) and one dummy per decade except the first. ``top_n``
    keeps the most frequent eligible words, ranked by mean log frequency over
    the table (``rank_by="total"``) or within each decade (``"decade"``).
    """
    if measure not in ("global", "local"):
        raise ValueError(f"measure must be 'global' or 'local', got {measure!r}")
    if mode not in VERB_SIDE:
        raise ValueError(f"mode must be one of {sorted(VERB_SIDE)}, got {mode!r}")
    if rank_by not in ("total", "decade"):
        raise ValueError(f"rank_by must be 'total' or 'decade', got {rank_by!r}")
    if not changes.standardized:
        raise ValueError("change table must be standardized first")

    verb_tags = VERB_SIDE[mode]
    z = changes.z_global if measure == "global" else changes.z_local
    freq = np.asarray(changes.freq, dtype=np.float64)
    rows = []
    for i, w in enumerate(changes.word):
        tag = pos.get(w)
        if tag == "NOUN":
            rows.append((i, 1.0))
        elif tag in verb_tags:
            rows.append((i, 0.0))
    idx = np.array([r[0] for r in rows], dtype=np.int64)
    is_noun = np.array([r[1] for r in rows])

    needs_freq = use_freq or top_n
    if needs_freq and len(idx):
        ok = np.isfinite(freq[idx])
        idx, is_noun = idx[ok], is_noun[ok]

    if top_n and len(idx):
        if rank_by == "total":
            words = [changes.word[i] for i in idx]
            sums = {}
            for w, f in zip(words, freq[idx]):
                s, n = sums.get(w, (0.0, 0))
                sums[w] = (s + f, n + 1)
            ranked = sorted(sums, key=lambda w: (-sums[w][0] / sums[w][1], w))
            keep_words = set(ranked[:top_n])
            keep = np.array([w in keep_words for w in words])
        else:
            keep = np.zeros(len(idx), dtype=bool)
            by_decade = {}
            for n, i in enumerate(idx):
                by_decade.setdefault(changes.t_start[i], []).append(n)
            for members in by_decade.values():
                members.sort(key=lambda n: (-freq[idx[n]], changes.word[idx[n]]))
                keep[members[:top_n]] = True
        idx, is_noun = idx[keep], is_noun[keep]

    if len(idx) == 0:
        raise ValueError("no eligible rows (need NOUN/VERB words with finite covariates)")

    decades = [changes.t_start[i] for i in idx]
    levels = sorted(set(decades), key=_decade_key)
    cols = [np.ones(len(idx)), is_noun]
    names = ["intercept", NOUN_COLUMN]
    if use_freq:
        cols.append(freq[idx])
        names.append("log_freq")
    for lev in levels[1:]:
        cols.append(np.array([1.0 if d == lev else 0.0 for d in decades]))
        names.append(f"decade[{lev}]")

    words = [changes.word[i] for i in idx]
    group_words = sorted(set(words))
    gid = {w: n for n, w in enumerate(group_words)}
    return RegressionDataset(
        y=np.asarray(z[idx], dtype=np.float64),
        X=np.column_stack(cols),
        columns=names,
        groups=np.array([gid[w] for w in words], dtype=np.int64),
        group_words=group_words,
        decades=decades,
        measure=measure,
    )


def check_design(X: np.ndarray, columns) -> None:
    """Raise :class:`SingularDesignError` naming a collinear column set."""
    n, p = X.shape
    if n < p:
        raise SingularDesignError(columns, f"{n} rows for {p} coefficients")
    scale = np.maximum(np.linalg.norm(X, axis=0), 1e-300)
    Xs = X / scale
    for j in range(p):
        if scale[j] <= 1e-300:
            raise SingularDesignError([columns[j]], f"singular design; column {columns[j]} is all zero")
        if j == 0:
            continue
        prev = Xs[:, :j]
        coef, *_ = np.linalg.lstsq(prev, Xs[:, j], rcond=None)
        resid = Xs[:, j] - prev @ coef
        if np.linalg.norm(resid) < 1e-10:
            involved = [columns[i] for i in range(j) if abs(coef[i]) > 1e-8] + [columns[j]]
            raise SingularDesignError(involved)


@dataclass
class RegressionResult:
    columns: list
    coef: np.ndarray
    se: np.ndarray
    tau2: float
    sigma2: float
    loglik: float
    n_rows: int
    n_words: int
    method: str
    measure: str = "local"
    converged: bool = True
    iterations: int = 0
    trace: list = field(default_factory=list, repr=False)

    @property
    def zstat(self) -> np.ndarray:
        with np.errstate(divide="ignore", invalid="ignore"):
            return self.coef / self.se

    def __getitem__(self, name) -> float:
        return float(self.coef[self.columns.index(name)])

    def stderr(self, name) -> float:
        return float(self.se[self.columns.index(name)])

    def ci(self, name, z: float = Z_95) -> tuple:
        b, s = self[name], self.stderr(name)
        return b - z * s, b + z * s

    def to_dict(self) -> dict:
        num = lambda x: None if x is None or not math.isfinite(x) else float(x)
        return {
            "method": self.method,
            "measure": self.measure,
            "coefficients": {
                c: {"coef": num(b), "se": num(s), "z": num(zz)}
                for c, b, s, zz in zip(self.columns, self.coef, self.se, self.zstat)
            },
            "tau2": num(self.tau2),
            "sigma2": num(self.sigma2),
            "loglik": num(self.loglik),
            "n_rows": self.n_rows,
            "n_words": self.n_words,
            "converged": self.converged,
            "iterations": self.iterations,
        }

    def to_json(self, path):
        with open(path, "w", encoding="utf-8", newline="\n") as fh:
            json.dump(self.to_dict(), fh, indent=2, sort_keys=False)
            fh.write("\n")

    @classmethod
    def from_dict(cls, d: dict) -> "RegressionResult":
        nan = lambda x: math.nan if x is None else x
        cols = list(d["coefficients"])
        return cls(
            columns=cols,
            coef=np.array([nan(d["coefficients"][c]["coef"]) for c in cols]),
            se=np.array([nan(d["coefficients"][c]["se"]) for c in cols]),
            tau2=nan(d["tau2"]), sigma2=nan(d["sigma2"]), loglik=nan(d["loglik"]),
            n_rows=d["n_rows"], n_words=d["n_words"], method=d["method"],
            measure=d.get("measure", "local"), converged=d.get("converged", True),
            iterations=d.get("iterations", 0),
        )

    @classmethod
    def from_json(cls, path) -> "RegressionResult":
        with open(path, encoding="utf-8") as fh:
            return cls.from_dict(json.load(fh))


def fit_ols(d: RegressionDataset) -> RegressionResult:
    """Ordinary least squares with classical standard errors; ``tau2`` is 0."""
    X, y = d.X, d.y
    check_design(X, d.columns)
    n, p = X.shape
    xtx_inv = np.linalg.inv(X.T @ X)
    beta = xtx_inv @ (X.T @ y)
    resid = y - X @ beta
    rss = float(resid @ resid)
    sigma2 = rss / (n - p) if n > p else 0.0
    se = np.sqrt(np.maximum(np.diag(xtx_inv) * sigma2, 0.0))
    loglik = -0.5 * n * (math.log(2.0 * math.pi * rss / n) + 1.0) if rss > 0 else math.nan
    return RegressionResult(list(d.columns), beta, se, 0.0, sigma2, loglik, n, d.n_words, "OLS", d.measure)


class _Profile:
    """Profiled (RE)ML log-likelihood of the random-intercept model as a function of gamma."""

    def __init__(self, d: RegressionDataset, reml: bool):
        self.X, self.y = d.X, d.y
        _, g = np.unique(d.groups, return_inverse=True)
        self.g = g
        self.n_groups = int(g.max()) + 1
        self.sizes = np.bincount(g).astype(np.float64)
        self.sx = np.stack([np.bincount(g, weights=self.X[:, j], minlength=self.n_groups)
                            for j in range(self.X.shape[1])], axis=1)
        self.sy = np.bincount(g, weights=self.y, minlength=self.n_groups)
        self.xtx = self.X.T @ self.X
        self.xty = self.X.T @ self.y
        self.reml = reml

    def solve(self, gamma: float):
        c = gamma / (1.0 + self.sizes * gamma)
        xwx = self.xtx - (self.sx * c[:, None]).T @ self.sx
        xwy = self.xty - self.sx.T @ (c * self.sy)
        beta = np.linalg.solve(xwx, xwy)
        r = self.y - self.X @ beta
        rs = np.bincount(self.g, weights=r, minlength=self.n_groups)
        rss = float(r @ r - np.sum(c * rs * rs))
        n, p = self.X.shape
        dof = n - p if self.reml else n
        sigma2 = rss / dof
        logdet_h = float(np.sum(np.log1p(self.sizes * gamma)))
        ll = -0.5 * (dof * (math.log(2.0 * math.pi * sigma2) + 1.0) + logdet_h)
        if self.reml:
            ll -= 0.5 * np.linalg.slogdet(xwx)[1]
        return ll, beta, sigma2, xwx

    def loglik(self, gamma: float) -> float:
        return self.solve(gamma)[0]


def fit_mixed(d: RegressionDataset, reml: bool = False, tol: float = 1e-8,
              max_iter: int = 500) -> RegressionResult:
    """Random-intercept model by profiled maximum likelihood (or REML).

    ``gamma = tau2 / sigma2`` is located on a log grid, then refined by golden
    section on ``log(gamma)`` (or on ``gamma`` itself next to the zero
    boundary) until the bracket is narrower than ``tol``. ``trace`` records
    the incumbent ``(gamma, loglik)`` after every refinement step.
    """
    check_design(d.X, d.columns)
    n, p = d.X.shape
    if d.n_words < 2:
        raise ValueError("mixed model needs at least two words")
    if n - p <= 0:
        raise SingularDesignError(d.columns, f"{n} rows for {p} coefficients")
    prof = _Profile(d, reml)

    if prof.sizes.max() < 2:
        warnings.warn("every word has a single row; random-intercept variance is not identifiable, "
                      "fixing tau2 = 0", RuntimeWarning, stacklevel=2)
        gamma, trace, iters = 0.0, [], 0
    else:
        gamma, trace, iters = _maximize(prof.loglik, tol, max_iter)

    ll, beta, sigma2, xwx = prof.solve(gamma)
    cov = sigma2 * np.linalg.inv(xwx)
    se = np.sqrt(np.maximum(np.diag(cov), 0.0))
    return RegressionResult(list(d.columns), beta, se, gamma * sigma2, sigma2, ll, n, d.n_words,
                            "REML" if reml else "ML", d.measure, True, iters, trace)


def _maximize(f, tol, max_iter):
    grid = 10.0 ** _LOG_GRID
    vals = [f(0.0)] + [f(g) for g in grid]
    best = int(np.argmax(vals))
    trace = [(0.0 if best == 0 else float(grid[best - 1]), float(vals[best]))]

    if best <= 1:
        # optimum at or near the boundary: search gamma directly on [0, grid[1]]
        lo, hi, to_gamma = 0.0, float(grid[1]), (lambda x: x)
    else:
        lo = float(_LOG_GRID[best - 2])
        hi = float(_LOG_GRID[best]) if best < len(grid) else float(_LOG_GRID[-1])
        to_gamma = lambda x: 10.0 ** x
    g = lambda x: f(to_gamma(x))

    a, b = lo, hi
    x1 = b - _GOLDEN * (b - a)
    x2 = a + _GOLDEN * (b - a)
    f1, f2 = g(x1), g(x2)
    inc_x, inc_f = trace[0]
    for it in range(1, max_iter + 1):
        if f1 >= f2:
            b, x2, f2 = x2, x1, f1
            x1 = b - _GOLDEN * (b - a)
            f1 = g(x1)
        else:
            a, x1, f1 = x1, x2, f2
            x2 = a + _GOLDEN * (b - a)
            f2 = g(x2)
        for x, fx in ((x1, f1), (x2, f2)):
            if fx > inc_f:
                inc_x, inc_f = to_gamma(x), fx
        trace.append((float(inc_x), float(inc_f)))
        if b - a <= tol * (1.0 + abs(a) + abs(b)):
            return inc_x, trace, it
    raise ConvergenceError(f"gamma search did not converge in {max_iter} iterations", trace)


@dataclass
class ContrastReport:
    """Noun coefficient under each measure, with 95% intervals."""

    label: str
    beta_global: float
    se_global: float
    beta_local: float
    se_local: float

    @property
    def difference(self) -> float:
        return self.beta_local - self.beta_global

    def ci(self, which: str) -> tuple:
        b, s = (self.beta_global, self.se_global) if which == "global" else (self.beta_local, self.se_local)
        return b - Z_95 * s, b + Z_95 * s

    def plot_rows(self) -> list:
        """``(label, value, ci_low, ci_high)`` per bar."""
        out = []
        for which, b in (("global", self.beta_global), ("local", self.beta_local)):
            lo, hi = self.ci(which)
            out.append((f"{self.label}:{which}", b, lo, hi))
        return out

    def table(self) -> str:
        lines = ["measure\tbeta_noun\tse\tci_low\tci_high"]
        for which, b, s in (("global", self.beta_global, self.se_global),
                            ("local", self.beta_local, self.se_local)):
            lo, hi = self.ci(which)
            lines.append("\t".join([which] + [format_float(v) for v in (b, s, lo, hi)]))
        lines.append(f"difference\t{format_float(self.difference)}\t\t\t")
        return "\n".join(lines)


def pos_contrast_report(global_fit: RegressionResult, local_fit: RegressionResult,
                        label: str = "data") -> ContrastReport:
    return ContrastReport(label, global_fit[NOUN_COLUMN], global_fit.stderr(NOUN_COLUMN),
                          local_fit[NOUN_COLUMN], local_fit.stderr(NOUN_COLUMN))
