"""Command line interface.

    geolowrank compress    --synthetic shifted-manifold --kernel inverse-distance --method one-sided --rank 20
    geolowrank experiment  --preset test1-dataset1 --out results/test1
    geolowrank experiment  --config my-run.yaml
    geolowrank indicators  --preset exp2-indicator --out results/exp2.csv
    geolowrank bounds      --check all --size-guard 500
    geolowrank presets

Exit status is 0 on success, 1 when a check fails, 2 on usage or data errors.
"""
from __future__ import annotations

import argparse
import json
import sys
import time
from pathlib import Path
from typing import Optional, Sequence

import numpy as np

from .. import __version__
from ..bounds import BOUND_NAMES, DEFAULT_SIZE_GUARD
from ..factor import aca, evaluate_error, estimate_rel2, one_sided, symmetric, two_sided
from ..indicators import write_ratio_csv
from ..kernels import DeskScaleError, KernelMatrixHandle, kernel_names, parse_kernel
from ..pointset import SYNTHETIC_KINDS, SyntheticSpec, generate_synthetic, load_csv, standardize
from ..selectors import SELECTOR_METHODS, SelectorConfig, select
from .config import ConfigError, ExperimentConfig, load_config
from .presets import PRESET_DOCS, preset, preset_names
from .runner import bounds_suite, rows_to_csv, run_experiment, run_indicators, real_data_check, write_json

EXIT_OK, EXIT_CHECK_FAILED, EXIT_ERROR = 0, 1, 2


def _eprint(*args):
    print(*args, file=sys.stderr)


# --- compress ---------------------------------------------------------------------

def _compress(args) -> int:
    if args.x:
        X = load_csv(args.x)
        Y = load_csv(args.y) if args.y else None
        if args.standardize:
            X, _ = standardize(X)
            Y = standardize(Y)[0] if Y is not None else None
    else:
        X, Y = generate_synthetic(SyntheticSpec(args.synthetic, n=args.n, m=args.m, d=args.d,
                                                shift=args.shift, seed=args.seed))
    if args.same:
        Y = None
    params = dict(kv.split("=", 1) for kv in args.param)
    kernel = parse_kernel(args.kernel, X, Y if Y is not None else X, sigma_frac=args.sigma_frac,
                          **{k: float(v) for k, v in params.items()})
    h = KernelMatrixHandle(kernel, X, Y)
    sc = SelectorConfig(args.selector, fps_fraction=args.fps_fraction, seed=args.seed)
    t0 = time.perf_counter()
    if args.method == "one-sided":
        f = one_sided(h, args.rank, args.oversample, sc)
    elif args.method == "symmetric":
        f = symmetric(h, args.rank, args.oversample, sc)
    elif args.method == "aca":
        f = aca(h, args.rank)
    else:
        S1 = select(h.X, args.rank, sc)
        S2 = S1 if h.same_points else select(h.Y, args.rank, sc)
        f = two_sided(h, S1, S2, stabilize=args.stabilize, eps=args.eps)
    elapsed = time.perf_counter() - t0
    m, n = h.shape
    summary = {"method": f.method, "kernel": kernel.label, "m": m, "n": n, "d": h.X.dim,
               "rank": f.rank, "seconds": elapsed}
    if m * n <= args.error_guard:
        K = h.dense(args.error_guard)
        summary["rel2"] = evaluate_error(f, h, "rel2", args.error_guard, K=K)
        summary["maxnorm"] = evaluate_error(f, h, "max", args.error_guard, K=K)
        summary["error_mode"] = "dense"
    else:
        summary["rel2"] = estimate_rel2(f, h, seed=args.seed)
        summary["error_mode"] = "estimate"
    if args.save:
        np.savez(args.save, left=f.left, right=f.right)
        summary["saved"] = str(args.save)
    print(json.dumps(summary))
    return EXIT_OK


# --- experiment / indicators ----------------------------------------------------

def _load(args) -> ExperimentConfig:
    if args.preset:
        return preset(args.preset, csv=getattr(args, "csv", None))
    return load_config(args.config)


def _apply_overrides(cfg: ExperimentConfig, args) -> ExperimentConfig:
    if getattr(args, "seeds", None):
        cfg.seeds = list(args.seeds)
    if getattr(args, "repeats", None):
        cfg.repeats = args.repeats
    if args.out:
        cfg.output = {"csv": f"{args.out}.csv", "json": f"{args.out}.json"}
    return cfg


def _experiment(args) -> int:
    cfg = _apply_overrides(_load(args), args)
    if args.dump_config:
        print(cfg.to_yaml(), end="")
        return EXIT_OK
    if cfg.kind == "indicators":
        return _run_indicators(cfg, args)
    progress = None if args.quiet else (lambda line: _eprint(line))
    rows = run_experiment(cfg, progress)
    if not cfg.output:
        sys.stdout.write(rows_to_csv(rows))
    else:
        _eprint(f"wrote {len(rows)} rows to {cfg.output.get('csv')} and {cfg.output.get('json')}")
    check = real_data_check(rows, cfg)["real_data"]
    if check["applicable"]:
        _eprint(f"real-data spot check: {check['value']:.3e} vs {check['reference']:.1e} "
                f"-> {'PASS' if check['passed'] else 'FAIL'}")
    return EXIT_OK


def _run_indicators(cfg: ExperimentConfig, args) -> int:
    rows, log = run_indicators(cfg)
    if args.out:
        out = Path(args.out)
        csv_path = out if out.suffix == ".csv" else out.with_suffix(".csv")
        write_ratio_csv(rows, csv_path)
        write_json(csv_path.with_suffix(".json"), {
            "config": cfg.to_dict(), "config_hash": cfg.hash(), "log": log,
            "rows": [{"rank": r.rank, "ratios": r.ratios, "errors": list(r.errors),
                      "predictions": r.predictions} for r in rows]})
        _eprint(f"wrote {len(rows)} ratio rows to {csv_path}")
    else:
        print("rank," + ",".join(f"ratio_ind{k}" for k in range(1, 6)) + ",ratio_error")
        for r in rows:
            vals = [r.ratios.get(k) for k in (1, 2, 3, 4, 5, "error")]
            print(f"{r.rank}," + ",".join("" if v is None else f"{v:.6g}" for v in vals))
    return EXIT_OK


def _indicators(args) -> int:
    cfg = _load(args)
    if cfg.kind != "indicators":
        _eprint(f"preset/config {cfg.name!r} is not an indicator experiment")
        return EXIT_ERROR
    return _run_indicators(cfg, args)


# --- bounds ---------------------------------------------------------------------

def _bounds(args) -> int:
    wanted = set(BOUND_NAMES) if args.check == "all" else {args.check}
    results = bounds_suite(args.instances, args.seed, args.max_size, args.size_guard)
    failures = 0
    counts = {name: [0, 0, 0] for name in BOUND_NAMES}   # held, violated, precondition unmet
    records = []
    for info, reports in results:
        for rep in reports:
            if rep.name not in wanted:
                continue
            if not rep.preconditions:
                counts[rep.name][2] += 1
            elif rep.holds:
                counts[rep.name][0] += 1
            else:
                counts[rep.name][1] += 1
                failures += 1
                _eprint(f"VIOLATED {rep.name} on instance {info}: lhs={rep.lhs:.6e} rhs={rep.rhs:.6e}")
            records.append({**info, **rep.to_dict()})
    for name in BOUND_NAMES:
        if name in wanted:
            held, bad, skipped = counts[name]
            print(f"{name:>22}: {held} held, {bad} violated, {skipped} preconditions unmet")
    if args.json:
        write_json(args.json, {"instances": args.instances, "seed": args.seed, "reports": records})
    return EXIT_CHECK_FAILED if failures else EXIT_OK


def _presets(args) -> int:
    for name in preset_names():
        print(f"{name:>16}  {PRESET_DOCS[name]}")
    return EXIT_OK


# --- parser ---------------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="geolowrank",
                                description="Low-rank compression of kernel matrices by geometric selection.")
    p.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = p.add_subparsers(dest="command", required=True)

    c = sub.add_parser("compress", help="run one factorization and report its error")
    src = c.add_mutually_exclusive_group(required=True)
    src.add_argument("--x", help="CSV file with the points of X")
    src.add_argument("--synthetic", choices=SYNTHETIC_KINDS)
    c.add_argument("--y", help="CSV file with the points of Y (default: synthetic pair or Y = X)")
    c.add_argument("--same", action="store_true", help="use Y = X")
    c.add_argument("--standardize", action="store_true")
    c.add_argument("--n", type=int, default=1400)
    c.add_argument("--m", type=int)
    c.add_argument("--d", type=int, default=3)
    c.add_argument("--shift", type=float, default=2.7)
    c.add_argument("--kernel", required=True, choices=kernel_names())
    c.add_argument("--param", action="append", default=[], metavar="NAME=VALUE",
                   help="kernel parameter (repeatable); missing ones are derived from the data")
    c.add_argument("--sigma-frac", type=float)
    c.add_argument("--method", default="one-sided", choices=["one-sided", "two-sided", "symmetric", "aca"])
    c.add_argument("--rank", type=int, required=True)
    c.add_argument("--selector", default="fps", choices=SELECTOR_METHODS)
    c.add_argument("--fps-fraction", type=float, default=0.2)
    c.add_argument("--oversample", type=float, default=2.0)
    c.add_argument("--stabilize", action=argparse.BooleanOptionalAction, default=None)
    c.add_argument("--eps", type=float, default=1e-10)
    c.add_argument("--seed", type=int, default=0)
    c.add_argument("--error-guard", type=int, default=10**7)
    c.add_argument("--save", help="write the factors to this .npz file")
    c.set_defaults(func=_compress)

    for name, func, hlp in (("experiment", _experiment, "run a preset or config file"),
                            ("indicators", _indicators, "indicator ratio table for a preset or config")):
        e = sub.add_parser(name, help=hlp)
        g = e.add_mutually_exclusive_group(required=True)
        g.add_argument("--preset", choices=preset_names())
        g.add_argument("--config", help="YAML config file")
        e.add_argument("--csv", help="local copy of the real data set for dataset-backed presets")
        e.add_argument("--out", help="output path stem (writes STEM.csv and STEM.json)")
        if name == "experiment":
            e.add_argument("--seeds", type=int, nargs="+")
            e.add_argument("--repeats", type=int)
            e.add_argument("--dump-config", action="store_true", help="print the resolved config and exit")
            e.add_argument("--quiet", action="store_true")
        e.set_defaults(func=func)

    b = sub.add_parser("bounds", help="check every error estimate on seeded random instances")
    b.add_argument("--check", default="all", choices=("all",) + BOUND_NAMES)
    b.add_argument("--size-guard", type=int, default=DEFAULT_SIZE_GUARD)
    b.add_argument("--instances", type=int, default=50)
    b.add_argument("--max-size", type=int, default=120)
    b.add_argument("--seed", type=int, default=0)
    b.add_argument("--json", help="write every report to this file")
    b.set_defaults(func=_bounds)

    pr = sub.add_parser("presets", help="list the named experiments")
    pr.set_defaults(func=_presets)
    return p


def main(argv: Optional[Sequence[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except (ConfigError, DeskScaleError, FileNotFoundError, KeyError, ValueError) as exc:
        _eprint(f"error: {exc}")
        return EXIT_ERROR


if __name__ == "__main__":   # pragma: no cover
    sys.exit(main())
