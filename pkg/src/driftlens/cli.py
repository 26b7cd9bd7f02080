"""Command-line entry point: ``driftlens <subcommand>``.

Subcommands: train, align, neighbors, change, regress, casestudy, synth, run.
Every failure exits nonzero with a message tagged by the stage that failed.
"""

from __future__ import annotations

import argparse
import csv
import dataclasses
import hashlib
import json
import logging
import os
import sys
from dataclasses import dataclass, field
from datetime import datetime, timezone
from pathlib import Path
from typing import Optional, Sequence

import numpy as np
import scipy

from . import __version__
from .alignment import AlignedSeries, align_series
from .embedding_store import (FORMATS, PosLexicon, format_float, load_snapshot,
                              save_snapshot, sidecar_path, write_sidecar)
from .errors import ConfigError, DriftlensError
from .kernels import BACKEND
from .measures import DEFAULT_K, ChangeTable, case_study, default_threads, score_all, standardize
from .neighbors import nearest_neighbors
from .regression import (VERB_SIDE, RegressionResult, build_design, fit_mixed, fit_ols,
                         pos_contrast_report)

log = logging.getLogger("driftlens")

EXIT_CONFIG = 2
EXIT_STAGE = 1
PLOT_COLUMNS = ("label", "value", "ci_low", "ci_high")
MEASURES = ("global", "local")


class StageError(Exception):
    """An error raised inside a named pipeline stage."""

    def __init__(self, stage: str, error: BaseException):
        self.stage = stage
        self.error = error
        super().__init__(f"[{stage}] {error}")


class _Stage:
    # re-raise anything but config errors as StageError(name)
    def __init__(self, name):
        self.name = name

    def __enter__(self):
        log.info("stage %s", self.name)
        return self

    def __exit__(self, exc_type, exc, tb):
        if exc is None or isinstance(exc, (ConfigError, StageError)):
            return False
        if isinstance(exc, (DriftlensError, ValueError, KeyError, OSError, ArithmeticError)):
            raise StageError(self.name, exc) from exc
        return False


# ---------------------------------------------------------------------------
# configuration
# ---------------------------------------------------------------------------


@dataclass
class RunConfig:
    """Everything ``driftlens run`` needs; serializable to and from JSON."""

    snapshots: list = field(default_factory=list)
    out_dir: str = "driftlens_out"
    pos: Optional[str] = None
    sidecar_dir: Optional[str] = None
    format: Optional[str] = None
    aligned: bool = False
    anchor: str = "last"
    k: int = DEFAULT_K
    min_count: Optional[float] = None
    top_n: Optional[int] = 10000
    measures: list = field(default_factory=lambda: list(MEASURES))
    mode: str = "nounverb"
    method: str = "mixed"
    reml: bool = False
    rank_by: str = "total"
    regress: bool = True
    label: str = "data"
    seed: int = 0
    threads: Optional[int] = None

    @classmethod
    def from_dict(cls, d: dict) -> "RunConfig":
        known = {f.name for f in dataclasses.fields(cls)}
        unknown = sorted(set(d) - known)
        if unknown:
            raise ConfigError(f"unknown config keys: {', '.join(unknown)}")
        return cls(**d)

    @classmethod
    def from_file(cls, path) -> "RunConfig":
        try:
            with open(path, encoding="utf-8") as fh:
                d = json.load(fh)
        except (OSError, json.JSONDecodeError) as e:
            raise ConfigError(f"cannot read config {path}: {e}") from None
        if not isinstance(d, dict):
            raise ConfigError(f"config {path} must hold a JSON object")
        return cls.from_dict(d)

    def to_dict(self) -> dict:
        return dataclasses.asdict(self)

    def digest(self) -> str:
        blob = json.dumps(self.to_dict(), sort_keys=True, separators=(",", ":"))
        return hashlib.sha256(blob.encode("utf-8")).hexdigest()

    def resolve(self, base: Optional[Path] = None) -> "RunConfig":
        """Absolute paths and validated settings; raises :class:`ConfigError` before any compute."""
        base = Path(base or os.getcwd())
        absolute = lambda p: str((base / p).resolve()) if p is not None else None
        snaps = []
        for p in map(absolute, self.snapshots):
            # a directory stands for every snapshot file inside it
            snaps.extend(str(f) for f in snapshot_files(p)) if Path(p).is_dir() else snaps.append(p)
        if len(snaps) < 2:
            raise ConfigError("need at least two snapshots")
        for p in snaps:
            if not Path(p).is_file():
                raise ConfigError(f"snapshot not found: {p}")
        pos = absolute(self.pos)
        if self.regress:
            if pos is None:
                raise ConfigError("regression requested but no POS lexicon given (pos)")
            if not Path(pos).is_file():
                raise ConfigError(f"POS lexicon not found: {pos}")
        sidecar_dir = absolute(self.sidecar_dir)
        if sidecar_dir is not None and not Path(sidecar_dir).is_dir():
            raise ConfigError(f"sidecar directory not found: {sidecar_dir}")
        if self.format is not None and self.format not in FORMATS:
            raise ConfigError(f"format must be one of {FORMATS}")
        if self.k < 1:
            raise ConfigError("k must be >= 1")
        if self.top_n is not None and self.top_n < 1:
            raise ConfigError("top_n must be >= 1")
        bad = [m for m in self.measures if m not in MEASURES]
        if bad or not self.measures:
            raise ConfigError(f"measures must be a non-empty subset of {MEASURES}")
        if self.mode not in VERB_SIDE:
            raise ConfigError(f"mode must be one of {sorted(VERB_SIDE)}")
        if self.method not in ("mixed", "ols"):
            raise ConfigError("method must be 'mixed' or 'ols'")
        if self.rank_by not in ("total", "decade"):
            raise ConfigError("rank_by must be 'total' or 'decade'")
        if self.anchor not in ("first", "last"):
            try:
                int(self.anchor)
            except ValueError:
                raise ConfigError("anchor must be 'first', 'last' or a slice index") from None
        if self.threads is not None and self.threads < 1:
            raise ConfigError("threads must be >= 1")
        return dataclasses.replace(self, snapshots=snaps, pos=pos, sidecar_dir=sidecar_dir,
                                   out_dir=absolute(self.out_dir), measures=list(self.measures))


def sha256_file(path) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for block in iter(lambda: fh.read(1 << 20), b""):
            h.update(block)
    return h.hexdigest()


# ---------------------------------------------------------------------------
# shared helpers
# ---------------------------------------------------------------------------


def _anchor(value):
    return value if value in ("first", "last") else int(value)


def _label_key(label: str):
    try:
        return (0, float(label), label)
    except ValueError:
        return (1, 0.0, label)


def _load(path, format=None, sidecar_dir=None):
    sidecar = "auto"
    if sidecar_dir is not None:
        candidate = Path(sidecar_dir) / sidecar_path(path).name
        sidecar = candidate if candidate.is_file() else None
    return load_snapshot(path, format=format, sidecar=sidecar)


def _load_sorted(paths, format=None, sidecar_dir=None) -> list:
    snaps = [_load(p, format, sidecar_dir) for p in paths]
    labels = [s.time_label for s in snaps]
    if len(set(labels)) != len(labels):
        raise ConfigError(f"duplicate time labels among snapshots: {labels}")
    return sorted(snaps, key=lambda s: _label_key(s.time_label))


def _looks_like_snapshot(path) -> bool:
    # a word2vec header or a word followed by numbers; rules out lexicons and truth tables
    with open(path, encoding="utf-8") as fh:
        first = fh.readline()
    parts = first.split("\t") if "\t" in first else first.split()
    if len(parts) == 2 and all(p.strip().isdigit() for p in parts):
        return True
    try:
        [float(x) for x in parts[1:]]
    except ValueError:
        return False
    return len(parts) >= 3


def snapshot_files(directory) -> list:
    """Snapshot files in ``directory`` (``.tsv`` / ``.txt`` / ``.vec``).

    Frequency sidecars and files whose first line is not a vector row (POS
    lexicons, truth tables) are skipped.
    """
    d = Path(directory)
    if not d.is_dir():
        raise ConfigError(f"not a directory: {d}")
    files = sorted(p for p in d.iterdir()
                   if p.suffix in (".tsv", ".txt", ".vec") and not p.name.endswith(".freq.tsv")
                   and _looks_like_snapshot(p))
    if not files:
        raise ConfigError(f"no snapshot files in {d}")
    return files


def write_plot_csv(rows, path):
    with open(path, "w", encoding="utf-8", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(PLOT_COLUMNS)
        for label, value, lo, hi in rows:
            w.writerow([label, format_float(value), format_float(lo), format_float(hi)])


def emit_plot_data(kind: str, inputs, path, label: str = "data") -> list:
    """Write figure-ready bars as CSV (label, value, ci_low, ci_high) and return the rows.

    ``pos_contrast``: ``inputs`` is ``(global_fit, local_fit)`` as results or
    JSON paths; one bar per measure with a 95% interval on the noun
    coefficient. ``casestudy``: ``inputs`` is a case-study report; one bar per
    word with value ``z_local - z_global`` and a degenerate interval.
    """
    if kind == "pos_contrast":
        fits = []
        for f in inputs:
            if isinstance(f, (str, os.PathLike)):
                if not Path(f).is_file():
                    raise FileNotFoundError(f"missing fit artifact: {f}")
                f = RegressionResult.from_json(f)
            fits.append(f)
        rows = pos_contrast_report(fits[0], fits[1], label=label).plot_rows()
    elif kind == "casestudy":
        if inputs is None:
            raise FileNotFoundError("missing case-study report")
        rows = [(r.word, r.z_diff, r.z_diff, r.z_diff) for r in inputs.rows]
    else:
        raise ValueError(f"unknown plot kind {kind!r}")
    write_plot_csv(rows, path)
    return rows


def _fit(changes: ChangeTable, pos: PosLexicon, measure: str, cfg) -> RegressionResult:
    data = build_design(changes, pos, measure=measure, top_n=cfg.top_n, mode=cfg.mode,
                        rank_by=cfg.rank_by)
    if cfg.method == "ols":
        return fit_ols(data)
    return fit_mixed(data, reml=cfg.reml)


# ---------------------------------------------------------------------------
# pipeline
# ---------------------------------------------------------------------------


def plan(cfg: RunConfig) -> list:
    steps = [f"load {len(cfg.snapshots)} snapshots"]
    steps.append("use snapshots as already aligned" if cfg.aligned else f"align (anchor={cfg.anchor})")
    steps.append(f"score k={cfg.k} min_count={cfg.min_count} -> {Path(cfg.out_dir) / 'changes.tsv'}")
    if cfg.regress:
        for m in cfg.measures:
            steps.append(f"regress {m} ({cfg.method}, mode={cfg.mode}, top_n={cfg.top_n}) -> "
                         f"{Path(cfg.out_dir) / f'fit_{m}.json'}")
        if set(MEASURES) <= set(cfg.measures):
            steps.append(f"contrast -> {Path(cfg.out_dir) / 'contrast.csv'}")
    steps.append(f"manifest -> {Path(cfg.out_dir) / 'manifest.json'}")
    return steps


def run_pipeline(cfg: RunConfig, dry_run: bool = False, stream=None) -> dict:
    """Align, score, standardize and regress; returns ``{artifact: path}``.

    ``cfg`` must already be resolved. Stage failures raise :class:`StageError`.
    """
    stream = stream or sys.stdout
    if dry_run:
        for i, s in enumerate(plan(cfg), 1):
            print(f"{i}. {s}", file=stream)
        return {}
    threads = cfg.threads or default_threads()
    out = Path(cfg.out_dir)
    with _Stage("load"):
        snaps = _load_sorted(cfg.snapshots, cfg.format, cfg.sidecar_dir)
        pos = PosLexicon.from_file(cfg.pos) if cfg.regress else None
    with _Stage("align"):
        if cfg.aligned:
            series = AlignedSeries.unaligned(snaps)
        else:
            series = align_series(snaps, min_count=cfg.min_count, anchor=_anchor(cfg.anchor))
    with _Stage("score"):
        changes = standardize(score_all(series, k=cfg.k, min_count=cfg.min_count, threads=threads))
        out.mkdir(parents=True, exist_ok=True)
        artifacts = {"changes": out / "changes.tsv"}
        changes.to_tsv(artifacts["changes"])
    fits = {}
    if cfg.regress:
        for m in cfg.measures:
            with _Stage(f"regress:{m}"):
                fits[m] = _fit(changes, pos, m, cfg)
                artifacts[f"fit_{m}"] = out / f"fit_{m}.json"
                fits[m].to_json(artifacts[f"fit_{m}"])
        if set(MEASURES) <= set(fits):
            with _Stage("plot"):
                artifacts["contrast"] = out / "contrast.csv"
                emit_plot_data("pos_contrast", (fits["global"], fits["local"]), artifacts["contrast"],
                               label=cfg.label)
    with _Stage("validate"):
        ChangeTable.from_tsv(artifacts["changes"])
        for m in fits:
            RegressionResult.from_json(artifacts[f"fit_{m}"])
    with _Stage("manifest"):
        artifacts["manifest"] = out / "manifest.json"
        write_manifest(cfg, artifacts, series)
    return artifacts


def write_manifest(cfg: RunConfig, artifacts: dict, series: AlignedSeries):
    inputs = list(cfg.snapshots) + ([cfg.pos] if cfg.regress else [])
    inputs += [str(sidecar_path(p)) for p in cfg.snapshots if sidecar_path(p).is_file()]
    manifest = {
        "toolkit": "driftlens",
        "version": __version__,
        "numpy": np.__version__,
        "scipy": scipy.__version__,
        "kernel_backend": BACKEND,
        "timestamp": datetime.now(timezone.utc).isoformat(timespec="seconds"),
        "config": cfg.to_dict(),
        "config_sha256": cfg.digest(),
        "inputs": {p: sha256_file(p) for p in inputs},
        "outputs": {k: sha256_file(p) for k, p in artifacts.items() if k != "manifest"},
        "slices": series.labels,
        "alignment_residuals": list(series.residuals),
    }
    with open(artifacts["manifest"], "w", encoding="utf-8", newline="\n") as fh:
        json.dump(manifest, fh, indent=2)
        fh.write("\n")


# ---------------------------------------------------------------------------
# subcommands
# ---------------------------------------------------------------------------


def cmd_train(args):
    from .trainer import train
    with _Stage("train"):
        snap = train(args.corpus, window=args.window, dim=args.dim, cds=args.cds, power=args.power,
                     min_count=args.min_count, max_vocab=args.max_vocab, seed=args.seed,
                     time_label=args.time_label)
        save_snapshot(snap, args.out, format=args.format)
    print(f"wrote {args.out} ({len(snap.vocab)} words, dim {snap.dim})")
    return 0


def cmd_align(args):
    with _Stage("load"):
        snaps = _load_sorted(args.inputs, args.format)
    with _Stage("align"):
        series = align_series(snaps, min_count=args.min_count, anchor=_anchor(args.anchor),
                              center=args.center)
        out = Path(args.out_dir)
        out.mkdir(parents=True, exist_ok=True)
        for s in series:
            save_snapshot(s, out / f"{s.time_label}.tsv")
        info = {"slices": series.labels, "anchor": series.labels[series.anchor_index],
                "residuals": list(series.residuals)}
        with open(out / "alignment.json", "w", encoding="utf-8", newline="\n") as fh:
            json.dump(info, fh, indent=2)
            fh.write("\n")
    for a, b, r in zip(series.labels, series.labels[1:], series.residuals):
        print(f"{a}->{b}\tresidual={format_float(r)}")
    return 0


def cmd_neighbors(args):
    with _Stage("neighbors"):
        snap = _load(args.snapshot, args.format)
        ns = nearest_neighbors(snap, args.word, args.k)
    fh = open(args.out, "w", encoding="utf-8", newline="\n") if args.out else sys.stdout
    try:
        fh.write("rank\tword\tsimilarity\n")
        for rank, (w, sim) in enumerate(ns.entries, 1):
            fh.write(f"{rank}\t{w}\t{format_float(sim)}\n")
    finally:
        if args.out:
            fh.close()
    return 0


def _aligned_series(directory, format=None) -> AlignedSeries:
    return AlignedSeries.unaligned(_load_sorted(snapshot_files(directory), format))


def cmd_change(args):
    with _Stage("load"):
        series = _aligned_series(args.aligned_dir, args.format)
    with _Stage("score"):
        table = score_all(series, k=args.k, min_count=args.min_count, threads=args.threads)
        if not args.raw:
            table = standardize(table)
        table.to_tsv(args.out)
    print(f"wrote {args.out} ({len(table)} rows)")
    for reason, n in sorted(table.skipped.items()):
        if n:
            print(f"skipped {n} ({reason})")
    return 0


def cmd_regress(args):
    if not Path(args.pos).is_file():
        raise ConfigError(f"POS lexicon not found: {args.pos}")
    with _Stage("load"):
        changes = ChangeTable.from_tsv(args.changes)
        if not changes.standardized:
            changes = standardize(changes)
        pos = PosLexicon.from_file(args.pos)
    with _Stage(f"regress:{args.measure}"):
        fit = _fit(changes, pos, args.measure, args)
        fit.to_json(args.out)
    lo, hi = fit.ci("is_noun")
    print(f"beta_noun={format_float(fit['is_noun'])} se={format_float(fit.stderr('is_noun'))} "
          f"ci=[{format_float(lo)}, {format_float(hi)}] tau2={format_float(fit.tau2)}")
    return 0


def cmd_casestudy(args):
    words = [w for w in args.words.split(",") if w]
    if not words:
        raise ConfigError("--words is empty")
    with _Stage("load"):
        series = _aligned_series(args.aligned_dir, args.format)
    with _Stage("casestudy"):
        report = case_study(series, words, args.start, args.end, k=args.k, min_count=args.min_count,
                            threads=args.threads)
        if args.plot_data:
            emit_plot_data("casestudy", report, args.plot_data)
    print("word\td_global\td_local\tz_global\tz_local\tz_diff")
    for r in report.rows:
        print("\t".join([r.word] + [format_float(v) for v in (r.d_global, r.d_local, r.z_global,
                                                              r.z_local, r.z_diff)]))
    for w in report.skipped:
        print(f"skipped {w}: not present at both endpoints", file=sys.stderr)
    return 0


def cmd_synth(args):
    from .synth import make_scenario
    with _Stage("synth"):
        sc = make_scenario(n_words=args.words, dim=args.dim, n_clusters=args.clusters,
                           n_decades=args.decades, n_cultural=args.cultural, n_drift=args.drift,
                           mix=args.mix, step=args.step, n_unstable=args.unstable, seed=args.seed,
                           rotate=not args.shared_frame, k=args.k)
        out = Path(args.out_dir)
        out.mkdir(parents=True, exist_ok=True)
        for s in sc.snapshots:
            path = save_snapshot(s, out / f"{s.time_label}.tsv", sidecar=False)
            write_sidecar(s, sidecar_path(path), tags=sc.pos)
        sc.pos.save(out / "pos.tsv")
        sc.truth.to_tsv(out / "truth.tsv", labels=[s.time_label for s in sc.snapshots])
    counts = {k: len(sc.truth.of_type(k)) for k in ("cultural", "drift")}
    print(f"wrote {len(sc.snapshots)} snapshots to {out} (cultural={counts['cultural']}, "
          f"drift={counts['drift']})")
    return 0


_RUN_FLAGS = ("snapshots", "out_dir", "pos", "sidecar_dir", "format", "anchor", "k", "min_count",
              "top_n", "measures", "mode", "method", "label", "seed", "threads", "rank_by")


def cmd_run(args):
    cfg = RunConfig.from_file(args.config) if args.config else RunConfig()
    base = Path(args.config).resolve().parent if args.config else None
    overrides = {k: getattr(args, k) for k in _RUN_FLAGS if getattr(args, k) is not None}
    for flag in ("aligned", "reml"):
        if getattr(args, flag):
            overrides[flag] = True
    if args.no_regress:
        overrides["regress"] = False
    cfg = dataclasses.replace(cfg, **overrides)
    # paths given on the command line are relative to the working directory
    if base is not None:
        for key in ("snapshots", "out_dir", "pos", "sidecar_dir"):
            if key in overrides:
                v = overrides[key]
                setattr(cfg, key, [str(Path(p).resolve()) for p in v] if key == "snapshots"
                        else str(Path(v).resolve()))
    cfg = cfg.resolve(base)
    artifacts = run_pipeline(cfg, dry_run=args.dry_run)
    for name, path in artifacts.items():
        print(f"{name}\t{path}")
    return 0


# ---------------------------------------------------------------------------
# argument parsing
# ---------------------------------------------------------------------------


def _csv_list(s):
    return [x for x in s.split(",") if x]


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="driftlens", description="Global and local measures of semantic change.")
    p.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    p.add_argument("-v", "--verbose", action="store_true", help="log progress to stderr")
    sub = p.add_subparsers(dest="command", required=True)

    t = sub.add_parser("train", help="PPMI + SVD embedding from a corpus file")
    t.add_argument("--corpus", required=True)
    t.add_argument("--window", type=int, default=4)
    t.add_argument("--dim", type=int, default=100)
    t.add_argument("--cds", type=float, default=0.75, help="context distribution smoothing exponent")
    t.add_argument("--power", type=float, default=0.5, help="singular value weighting exponent")
    t.add_argument("--min-count", type=int, default=1)
    t.add_argument("--max-vocab", type=int)
    t.add_argument("--seed", type=int, default=0)
    t.add_argument("--time-label")
    t.add_argument("--format", choices=FORMATS, default="tsv")
    t.add_argument("--out", required=True)
    t.set_defaults(func=cmd_train)

    a = sub.add_parser("align", help="rotate snapshots into one frame")
    a.add_argument("--in", dest="inputs", nargs="+", required=True)
    a.add_argument("--anchor", default="last", help="first, last or a slice index")
    a.add_argument("--min-count", type=float)
    a.add_argument("--center", action="store_true")
    a.add_argument("--format", choices=FORMATS)
    a.add_argument("--out-dir", required=True)
    a.set_defaults(func=cmd_align)

    n = sub.add_parser("neighbors", help="k nearest neighbors of a word")
    n.add_argument("--snapshot", required=True)
    n.add_argument("--word", required=True)
    n.add_argument("--k", type=int, default=DEFAULT_K)
    n.add_argument("--format", choices=FORMATS)
    n.add_argument("--out")
    n.set_defaults(func=cmd_neighbors)

    c = sub.add_parser("change", help="score every word on every consecutive pair")
    c.add_argument("--aligned-dir", required=True)
    c.add_argument("--k", type=int, default=DEFAULT_K)
    c.add_argument("--min-count", type=float)
    c.add_argument("--raw", action="store_true", help="skip standardization")
    c.add_argument("--threads", type=int)
    c.add_argument("--format", choices=FORMATS)
    c.add_argument("--out", required=True)
    c.set_defaults(func=cmd_change)

    r = sub.add_parser("regress", help="noun vs verb regression on a change table")
    r.add_argument("--changes", required=True)
    r.add_argument("--pos", required=True)
    r.add_argument("--measure", choices=MEASURES, default="local")
    r.add_argument("--top-n", type=int, default=10000)
    r.add_argument("--mode", choices=sorted(VERB_SIDE), default="nounverb")
    r.add_argument("--method", choices=("mixed", "ols"), default="mixed")
    r.add_argument("--reml", action="store_true")
    r.add_argument("--rank-by", choices=("total", "decade"), default="total")
    r.add_argument("--out", required=True)
    r.set_defaults(func=cmd_regress)

    cs = sub.add_parser("casestudy", help="both measures for chosen words between two slices")
    cs.add_argument("--aligned-dir", required=True)
    cs.add_argument("--words", required=True, help="comma-separated")
    cs.add_argument("--start", required=True)
    cs.add_argument("--end", required=True)
    cs.add_argument("--k", type=int, default=DEFAULT_K)
    cs.add_argument("--min-count", type=float)
    cs.add_argument("--threads", type=int)
    cs.add_argument("--format", choices=FORMATS)
    cs.add_argument("--plot-data", help="write label,value,ci_low,ci_high CSV here")
    cs.set_defaults(func=cmd_casestudy)

    s = sub.add_parser("synth", help="synthetic series with planted changes")
    s.add_argument("--words", type=int, default=500)
    s.add_argument("--dim", type=int, default=50)
    s.add_argument("--clusters", type=int, default=16)
    s.add_argument("--decades", type=int, default=5)
    s.add_argument("--cultural", type=int, default=10)
    s.add_argument("--drift", type=int, default=50)
    s.add_argument("--unstable", type=int, default=5)
    s.add_argument("--mix", type=float, default=1.0)
    s.add_argument("--step", type=float, default=0.5)
    s.add_argument("--k", type=int, default=DEFAULT_K, help="neighborhood size drift must preserve")
    s.add_argument("--seed", type=int, default=0)
    s.add_argument("--shared-frame", action="store_true", help="skip the per-slice random rotations")
    s.add_argument("--out-dir", required=True)
    s.set_defaults(func=cmd_synth)

    u = sub.add_parser("run", help="align, score, standardize and regress in one go")
    u.add_argument("--config", help="JSON file with RunConfig fields; flags override it")
    u.add_argument("--snapshots", nargs="+")
    u.add_argument("--pos")
    u.add_argument("--sidecar-dir")
    u.add_argument("--format", choices=FORMATS)
    u.add_argument("--out-dir")
    u.add_argument("--aligned", action="store_true", help="inputs already share a frame")
    u.add_argument("--anchor")
    u.add_argument("--k", type=int)
    u.add_argument("--min-count", type=float)
    u.add_argument("--top-n", type=int)
    u.add_argument("--measures", type=_csv_list)
    u.add_argument("--mode", choices=sorted(VERB_SIDE))
    u.add_argument("--method", choices=("mixed", "ols"))
    u.add_argument("--reml", action="store_true")
    u.add_argument("--rank-by", choices=("total", "decade"))
    u.add_argument("--no-regress", action="store_true")
    u.add_argument("--label")
    u.add_argument("--seed", type=int)
    u.add_argument("--threads", type=int)
    u.add_argument("--dry-run", action="store_true", help="print the resolved plan and write nothing")
    u.set_defaults(func=cmd_run)
    return p


def main(argv: Optional[Sequence[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(name)s: %(message)s")
    if getattr(args, "threads", None) is not None and args.threads < 1:
        print("driftlens: error [config]: --threads must be >= 1", file=sys.stderr)
        return EXIT_CONFIG
    try:
        return args.func(args)
    except ConfigError as e:
        print(f"driftlens: error [config]: {e}", file=sys.stderr)
        return EXIT_CONFIG
    except StageError as e:
        print(f"driftlens: error [{e.stage}]: {e.error}", file=sys.stderr)
        return EXIT_STAGE


if __name__ == "__main__":
    sys.exit(main())
