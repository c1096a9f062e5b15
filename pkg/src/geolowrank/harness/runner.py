"""Experiment execution: dataset resolution, method sweeps, output files.

``run_experiment`` handles ``kind: sweep`` and ``kind: scaling`` configs and
returns :class:`ResultRow` objects; ``run_indicators`` handles
``kind: indicators`` and returns ratio rows. Errors are exact (dense) while
``m * n <= error_guard``; above it the relative 2-norm error is a seeded
power-iteration estimate and the max-norm error is ``not-computed``.
"""
from __future__ import annotations

import csv
import io
import json
import math
import os
import tempfile
import time
import tracemalloc
from dataclasses import asdict, dataclass, fields
from pathlib import Path
from typing import Callable, Optional, Sequence, Union

import numpy as np

from ..bounds import BoundReport, check_all
from ..factor import aca, estimate_rel2, evaluate_error, one_sided, symmetric, two_sided
from ..indicators import RatioRow, compare_choices
from ..kernels import KernelMatrixHandle, KernelSpec, parse_kernel, radius
from ..linalg import singular_values, spectral_norm, svd_dense
from ..pointset import (PointSet, SyntheticSpec, generate_synthetic, load_csv, standardize,
                        subsample_without_replacement)
from ..selectors import SelectorConfig, fps_select, select, uniform_select
from .config import ConfigError, DatasetConfig, ExperimentConfig, KernelConfig, MethodConfig

__all__ = [
    "ResultRow",
    "Dataset",
    "NOT_COMPUTED",
    "resolve_dataset",
    "resolve_kernel",
    "run_experiment",
    "run_indicators",
    "bounds_suite",
    "real_data_check",
    "rows_to_csv",
    "write_rows_csv",
    "read_rows_csv",
    "write_json",
    "atomic_write",
]

NOT_COMPUTED = "not-computed"

#: seeds of the per-rank uniform draws in indicator runs (X, Y), offset by r
INDICATOR_SEED_BASE = (1000, 2000)

#: reference order of magnitude for a real-data spot check (DD-ANC, first
#: registry kernel table1:k1 = |x - y|, rank 50 on the 561-dimensional data set)
REAL_DATA_REFERENCE = {"method": "DD-ANC", "kernel": "table1:k1", "rank": 50, "value": 9.0e-5,
                    "factor": 10.0}


@dataclass
class ResultRow:
    method: str
    kernel: str
    rank: int
    rel2: Union[float, str, None]       # float, NOT_COMPUTED, or None if not requested
    maxnorm: Union[float, str, None]
    error_mode: str                     # dense | estimate | not-computed
    wall_time: float                    # seconds, mean over repeats
    peak_memory: Optional[int]          # bytes, best effort (tracemalloc)
    seed: int
    m: int
    n: int
    d: int
    dataset_tag: str                    # synthetic | csv | synthetic-substitute
    config_hash: str

    def sort_key(self):
        return (self.method, self.kernel, self.rank, self.seed, self.n, self.d)


COLUMNS = [f.name for f in fields(ResultRow)]


# --- datasets -------------------------------------------------------------------

@dataclass
class Dataset:
    X: PointSet
    Y: Optional[PointSet]     # None: Y = X (same point set)
    tag: str

    @property
    def sizes(self) -> tuple[int, int, int]:
        n = len(self.X) if self.Y is None else len(self.Y)
        return len(self.X), n, self.X.dim


def _synthetic(spec: dict, seed: int) -> tuple[PointSet, PointSet]:
    opts = dict(spec)
    opts["seed"] = int(opts.get("seed", 0)) + int(seed)
    try:
        return generate_synthetic(SyntheticSpec(**opts))
    except TypeError as exc:
        raise ConfigError(f"bad synthetic dataset spec {spec}: {exc}") from exc


def _from_csv(ds: DatasetConfig, seed: int) -> tuple[PointSet, PointSet]:
    X = load_csv(ds.csv)
    if ds.csv_y is not None:
        Y = load_csv(ds.csv_y)
        if ds.standardize:
            pooled, rec = standardize(np.vstack([X.points, Y.points]))
            X, Y = PointSet(pooled.points[:len(X)], X.label), PointSet(pooled.points[len(X):], Y.label)
        if ds.m is not None:
            X = subsample_without_replacement(X, ds.m, seed)
        if ds.n is not None:
            Y = subsample_without_replacement(Y, ds.n, seed + 1)
        return X, Y
    # one file: X and Y are disjoint random samples of it
    if ds.standardize:
        X, _ = standardize(X)
    total = len(X)
    m = ds.m if ds.m is not None else total // 2
    n = ds.n if ds.n is not None else total - m
    if m + n > total:
        raise ConfigError(f"{ds.csv}: cannot draw m + n = {m + n} points from {total}")
    perm = np.random.default_rng(seed).permutation(total)
    return X.take(perm[:m], "X"), X.take(perm[m:m + n], "Y")


def resolve_dataset(ds: DatasetConfig, seed: int = 0) -> Dataset:
    """Point sets for one seed.

    A synthetic spec's own seed is offset by ``seed``. A CSV that does not
    exist falls back to ``ds.substitute`` and the rows are tagged
    ``synthetic-substitute``; without a substitute that is an error.
    """
    if ds.csv is not None and Path(ds.csv).is_file():
        X, Y = _from_csv(ds, seed)
        tag = "csv"
    elif ds.csv is not None:
        if ds.substitute is None:
            raise FileNotFoundError(f"dataset {ds.csv!r} not found and no substitute configured")
        X, Y = _synthetic(ds.substitute, seed)
        tag = "synthetic-substitute"
    else:
        X, Y = _synthetic(ds.synthetic, seed)
        tag = "synthetic"
        if ds.standardize:
            pooled, _ = standardize(np.vstack([X.points, Y.points]))
            X, Y = PointSet(pooled.points[:len(X)], X.label), PointSet(pooled.points[len(X):], Y.label)
    if ds.y_rule == "same":
        Y = None
    elif ds.y_rule == "shift-2R/sqrt(d)":
        Y = PointSet(X.points + 2.0 * radius(X) / math.sqrt(X.dim), label="X+2R/sqrt(d)")
    return Dataset(X, Y, tag)


def resolve_kernel(kc: KernelConfig, data: Dataset) -> KernelSpec:
    Y = data.X if data.Y is None else data.Y
    return parse_kernel(kc.name, data.X, Y, sigma_frac=kc.sigma_frac, **kc.params)


def kernel_label(kc: KernelConfig) -> str:
    if kc.sigma_frac is not None:
        return f"{kc.name}[sigma={kc.sigma_frac:g}R]"
    if kc.params:
        return kc.name + "(" + ",".join(f"{k}={v:g}" for k, v in sorted(kc.params.items())) + ")"
    return kc.name


# --- timing ---------------------------------------------------------------------

def _timed(build: Callable[[], object], repeats: int, warmup: bool = False):
    """Result of one traced build plus the mean wall time of ``repeats``
    untraced builds. Returns (result, mean_seconds, peak_bytes)."""
    if warmup:
        build()
    started = not tracemalloc.is_tracing()
    if started:
        tracemalloc.start()
    tracemalloc.reset_peak()
    t0 = time.perf_counter()
    result = build()
    traced_time = time.perf_counter() - t0
    peak = tracemalloc.get_traced_memory()[1]
    if started:
        tracemalloc.stop()
    if repeats <= 1:
        return result, traced_time, int(peak)
    times = []
    for _ in range(repeats):
        t0 = time.perf_counter()
        build()
        times.append(time.perf_counter() - t0)
    return result, float(np.mean(times)), int(peak)


# --- factorization dispatch -----------------------------------------------------

def _builder(mc: MethodConfig, h: KernelMatrixHandle, r: int, seed: int) -> Callable:
    sc = mc.selector_config(seed)
    if mc.algorithm == "one-sided":
        return lambda: one_sided(h, r, mc.oversample, sc, mc.side)
    if mc.algorithm == "symmetric":
        return lambda: symmetric(h, r, mc.oversample, sc)
    if mc.algorithm == "aca":
        return lambda: aca(h, r)
    if mc.algorithm == "two-sided":
        def build():
            S1 = select(h.X, r, sc)
            S2 = S1 if h.same_points else select(h.Y, r, sc)
            return two_sided(h, S1, S2, stabilize=mc.stabilize, eps=mc.eps)
        return build
    raise ConfigError(f"algorithm {mc.algorithm!r} has no factorization")


class _DenseCache:
    """Dense K, ||K||_2 and (lazily) its SVD for one (kernel, seed)."""

    def __init__(self, h: KernelMatrixHandle, guard: int):
        self.h = h
        m, n = h.shape
        self.ok = m * n <= guard
        self.guard = guard
        self.K = h.dense(guard) if self.ok else None
        self.norm = spectral_norm(self.K, guard) if self.ok else None
        self._svd = None
        self._sv = None
        self.svd_time = 0.0

    def singular_values(self):
        if self._sv is None:
            t0 = time.perf_counter()
            self._sv = singular_values(self.K, self.guard)
            self.svd_time = time.perf_counter() - t0
        return self._sv

    def svd(self):
        if self._svd is None:
            t0 = time.perf_counter()
            self._svd = svd_dense(self.K, self.guard)
            self._sv = self._svd[1]
            self.svd_time = time.perf_counter() - t0
        return self._svd


def _errors(f, cache: _DenseCache, norms, seed) -> tuple:
    rel2 = maxnorm = None
    if cache.ok:
        if "rel2" in norms:
            rel2 = evaluate_error(f, cache.h, "rel2", cache.guard, K=cache.K, K_norm=cache.norm)
        if "max" in norms:
            maxnorm = evaluate_error(f, cache.h, "max", cache.guard, K=cache.K)
        return rel2, maxnorm, "dense"
    if "rel2" in norms:
        rel2 = estimate_rel2(f, cache.h, seed=seed)
    if "max" in norms:
        maxnorm = NOT_COMPUTED
    return rel2, maxnorm, "estimate" if "rel2" in norms else NOT_COMPUTED


def _svd_floor(cache: _DenseCache, r: int, norms) -> tuple:
    if not cache.ok:
        return (NOT_COMPUTED if "rel2" in norms else None,
                NOT_COMPUTED if "max" in norms else None, NOT_COMPUTED)
    rel2 = maxnorm = None
    if "max" in norms:
        U, s, Vt = cache.svd()
        maxnorm = float(np.abs(cache.K - (U[:, :r] * s[:r]) @ Vt[:r]).max())
    if "rel2" in norms:
        s = cache.singular_values()
        rel2 = float(s[r] / s[0]) if r < s.size and s[0] > 0 else 0.0
    return rel2, maxnorm, "dense"


def _sweep(cfg: ExperimentConfig, progress: Optional[Callable[[str], None]]) -> list[ResultRow]:
    rows = []
    digest = cfg.hash()
    for seed in cfg.seeds:
        data = resolve_dataset(cfg.dataset, seed)
        m, n, d = data.sizes
        if cfg.ranks and cfg.ranks[-1] > min(m, n):
            raise ConfigError(f"rank {cfg.ranks[-1]} exceeds min(m, n) = {min(m, n)}")
        for kc in cfg.kernels:
            spec = resolve_kernel(kc, data)
            h = KernelMatrixHandle(spec, data.X, data.Y)
            cache = _DenseCache(h, cfg.error_guard)
            klabel = kernel_label(kc)
            for mc in cfg.methods:
                for r in cfg.ranks:
                    if mc.algorithm == "svd-floor":
                        rel2, mx, mode = _svd_floor(cache, r, cfg.norms)
                        wall, peak = cache.svd_time, None
                    else:
                        f, wall, peak = _timed(_builder(mc, h, r, seed), cfg.repeats)
                        rel2, mx, mode = _errors(f, cache, cfg.norms, seed)
                    rows.append(ResultRow(mc.label, klabel, r, rel2, mx, mode, wall, peak, seed,
                                          m, n, d, data.tag, digest))
                    if progress:
                        progress(_describe(rows[-1]))
    return rows


def _scaling(cfg: ExperimentConfig, progress) -> list[ResultRow]:
    sc = cfg.scaling
    if sc is None:
        raise ConfigError("kind 'scaling' needs a 'scaling' section")
    base = dict(cfg.dataset.synthetic or cfg.dataset.substitute or {"kind": "uniform-boxes"})
    digest = cfg.hash()
    rows = []
    for seed in cfg.seeds:
        for d in sc.dims:
            for size in sc.sizes:
                X, Y = _synthetic({**base, "n": size, "m": size, "d": d}, seed)
                data = Dataset(X, Y, "synthetic")
                for kc in cfg.kernels:
                    h = KernelMatrixHandle(resolve_kernel(kc, data), X, Y)
                    for mc in cfg.methods:
                        f, wall, peak = _timed(_builder(mc, h, sc.rank, seed), cfg.repeats, warmup=True)
                        if size <= sc.error_max_n:
                            cache = _DenseCache(h, cfg.error_guard)
                            rel2, mx, mode = _errors(f, cache, cfg.norms, seed)
                        else:
                            rel2 = NOT_COMPUTED if "rel2" in cfg.norms else None
                            mx = NOT_COMPUTED if "max" in cfg.norms else None
                            mode = NOT_COMPUTED
                        rows.append(ResultRow(mc.label, kernel_label(kc), sc.rank, rel2, mx, mode, wall,
                                              peak, seed, size, size, d, "synthetic", digest))
                        if progress:
                            progress(_describe(rows[-1]))
    return rows


def _describe(row: ResultRow) -> str:
    def fmt(v):
        return f"{v:.3e}" if isinstance(v, float) else str(v)
    return (f"{row.method:>12} {row.kernel:>24} r={row.rank:<4} n={row.n:<6} d={row.d:<4} "
            f"rel2={fmt(row.rel2)} max={fmt(row.maxnorm)} t={row.wall_time:.4f}s")


def run_experiment(cfg: ExperimentConfig, progress: Optional[Callable[[str], None]] = None
                   ) -> list[ResultRow]:
    """Rows for every (seed, kernel, method, rank), sorted by method, kernel,
    rank, seed. Output files named in ``cfg.output`` (``csv``, ``json``) are
    written atomically."""
    if cfg.kind == "indicators":
        raise ConfigError("indicator configs produce ratio tables; use run_indicators")
    rows = _scaling(cfg, progress) if cfg.kind == "scaling" else _sweep(cfg, progress)
    rows.sort(key=ResultRow.sort_key)
    if cfg.output.get("csv"):
        write_rows_csv(rows, cfg.output["csv"])
    if cfg.output.get("json"):
        write_json(cfg.output["json"], {"config": cfg.to_dict(), "config_hash": cfg.hash(),
                                        "rows": [asdict(r) for r in rows],
                                        "checks": real_data_check(rows, cfg)})
    return rows


# --- indicator runs -------------------------------------------------------------

def _indicator_choice(mc: MethodConfig, h: KernelMatrixHandle, ranks, seed, log):
    """FPS choices are nested prefixes of one ordering; any other selector
    is redrawn for every rank with the seeds logged in ``log``."""
    sc = mc.selector_config(seed)
    same = h.same_points
    if sc.method == "fps":
        S1 = fps_select(h.X, max(ranks), sc)
        S2 = S1 if same else fps_select(h.Y, max(ranks), sc)
        log[mc.label] = {"selector": "fps", "start": sc.fps_start}
        return (S1, S2)
    seeds = {}

    def choice(r):
        sx = seed * 100_000 + INDICATOR_SEED_BASE[0] + r
        sy = seed * 100_000 + INDICATOR_SEED_BASE[1] + r
        seeds[r] = [sx] if same else [sx, sy]
        if sc.method == "uniform":
            S1 = uniform_select(h.X, r, sx)
            S2 = S1 if same else uniform_select(h.Y, r, sy)
        else:
            S1 = select(h.X, r, SelectorConfig(**{**asdict(sc), "seed": sx}))
            S2 = S1 if same else select(h.Y, r, SelectorConfig(**{**asdict(sc), "seed": sy}))
        return S1, S2

    log[mc.label] = {"selector": sc.method, "seeds_per_rank": seeds}
    return choice


def run_indicators(cfg: ExperimentConfig) -> tuple[list[RatioRow], dict]:
    """Ratio table (second method / first method) on the first kernel and
    first seed of an ``indicators`` config, plus a log of the subsets' seeds."""
    if cfg.kind != "indicators":
        raise ConfigError("run_indicators needs a config of kind 'indicators'")
    if len(cfg.methods) != 2:
        raise ConfigError("an indicator config compares exactly two methods (choice A, choice B)")
    seed = cfg.seeds[0]
    data = resolve_dataset(cfg.dataset, seed)
    h = KernelMatrixHandle(resolve_kernel(cfg.kernels[0], data), data.X, data.Y)
    m, n, _ = data.sizes
    if cfg.ranks and cfg.ranks[-1] > min(m, n):
        raise ConfigError(f"rank {cfg.ranks[-1]} exceeds min(m, n) = {min(m, n)}")
    log = {"seed": seed, "kernel": h.kernel.label, "m": m, "n": n, "dataset_tag": data.tag,
           "choice_A": cfg.methods[0].label, "choice_B": cfg.methods[1].label}
    if not cfg.ranks:
        return [], log
    a = _indicator_choice(cfg.methods[0], h, cfg.ranks, seed, log)
    b = _indicator_choice(cfg.methods[1], h, cfg.ranks, seed, log)
    rows = compare_choices(h, a, b, cfg.ranks)
    return rows, log


# --- bounds suite ---------------------------------------------------------------

def bounds_suite(instances: int = 50, seed: int = 0, max_size: int = 120,
                 size_guard: int = 500) -> list[tuple[dict, list[BoundReport]]]:
    """Every estimate on ``instances`` seeded random problems.

    Sizes m, n are drawn from [20, max_size]; kernels alternate between a
    Gaussian (sigma from the data radius) and log|x - y| on separated point
    sets; subsets alternate between FPS and uniform samples.
    """
    rng = np.random.default_rng(seed)
    out = []
    for k in range(instances):
        m, n = (int(v) for v in rng.integers(20, max_size + 1, size=2))
        d = int(rng.integers(1, 4))
        X = rng.random((m, d))
        Y = rng.random((n, d)) + (0.0 if k % 2 == 0 else 1.5)
        if k % 2 == 0:
            kernel = KernelSpec("gaussian", {"sigma": float(rng.uniform(0.3, 1.0))})
        else:
            kernel = KernelSpec("log-distance")
        h = KernelMatrixHandle(kernel, X, Y)
        r1, r2 = (int(v) for v in rng.integers(2, 9, size=2))
        method = "fps" if k % 4 < 2 else "uniform"
        sc = SelectorConfig(method, seed=int(rng.integers(2**31)))
        S1, S2 = select(h.X, r1, sc), select(h.Y, r2, sc)
        info = {"instance": k, "m": m, "n": n, "d": d, "kernel": kernel.label,
                "selector": method, "r1": r1, "r2": r2}
        out.append((info, check_all(h, S1, S2, size_guard=size_guard)))
    return out


# --- real-data spot check -------------------------------------------------------

def real_data_check(rows: Sequence[ResultRow], cfg: Optional[ExperimentConfig] = None) -> dict:
    """Order-of-magnitude check against a published real-data value.

    Applies only to rows computed on a user-supplied CSV (tag ``csv``); the
    synthetic stand-ins are not expected to reproduce it.
    """
    ref = REAL_DATA_REFERENCE
    hits = [r for r in rows if r.method == ref["method"] and r.kernel == ref["kernel"]
            and r.rank == ref["rank"] and r.dataset_tag == "csv" and isinstance(r.rel2, float)]
    if not hits:
        return {"real_data": {"applicable": False}}
    value = float(np.mean([r.rel2 for r in hits]))
    ok = ref["value"] / ref["factor"] <= value <= ref["value"] * ref["factor"]
    return {"real_data": {"applicable": True, "value": value, "reference": ref["value"],
                       "within_factor": ref["factor"], "passed": bool(ok)}}


# --- files ----------------------------------------------------------------------

def atomic_write(path: Union[str, Path], text: str) -> None:
    """Write via a temporary file in the same directory and rename."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.", suffix=".tmp")
    try:
        with os.fdopen(fd, "w", newline="") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def _cell(v) -> str:
    if v is None:
        return ""
    if isinstance(v, float):
        return repr(v)
    return str(v)


def rows_to_csv(rows: Sequence[ResultRow]) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(COLUMNS)
    for row in rows:
        w.writerow([_cell(getattr(row, c)) for c in COLUMNS])
    return buf.getvalue()


def write_rows_csv(rows: Sequence[ResultRow], path: Union[str, Path]) -> None:
    atomic_write(path, rows_to_csv(rows))


def _error_cell(s: str):
    if s == "":
        return None
    if s == NOT_COMPUTED:
        return NOT_COMPUTED
    return float(s)


def read_rows_csv(path: Union[str, Path]) -> list[ResultRow]:
    rows = []
    with open(path, newline="") as fh:
        for rec in csv.DictReader(fh):
            rows.append(ResultRow(
                method=rec["method"], kernel=rec["kernel"], rank=int(rec["rank"]),
                rel2=_error_cell(rec["rel2"]), maxnorm=_error_cell(rec["maxnorm"]),
                error_mode=rec["error_mode"], wall_time=float(rec["wall_time"]),
                peak_memory=int(rec["peak_memory"]) if rec["peak_memory"] else None,
                seed=int(rec["seed"]), m=int(rec["m"]), n=int(rec["n"]), d=int(rec["d"]),
                dataset_tag=rec["dataset_tag"], config_hash=rec["config_hash"]))
    return rows


def _jsonable(obj):
    if isinstance(obj, dict):
        return {str(k): _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, np.generic):
        return obj.item()
    if isinstance(obj, float) and not math.isfinite(obj):
        return str(obj)
    return obj


def write_json(path: Union[str, Path], payload: dict) -> None:
    atomic_write(path, json.dumps(_jsonable(payload), indent=2, default=str) + "\n")
