"""Named, fully pinned experiment configurations.

Sizes are desk scale: every preset finishes in minutes on one core. The
real UCI datasets are not bundled; presets that refer to them take a CSV
path and otherwise fall back to a clustered Gaussian-mixture stand-in with
the same ambient dimension, tagged ``synthetic-substitute`` in the output.
"""
from __future__ import annotations

from typing import Optional

from .config import ExperimentConfig, ScalingConfig

__all__ = ["preset", "preset_names", "PRESET_DOCS"]

DD_FPS = {"label": "DD-FPS", "algorithm": "one-sided", "selector": {"method": "fps"}}
DD_ANC = {"label": "DD-ANC", "algorithm": "one-sided", "selector": {"method": "anchor"}}
ACA = {"label": "ACA", "algorithm": "aca"}
SVD = {"label": "SVD", "algorithm": "svd-floor"}

BENCH_KERNELS = ["table1:k1", "table1:k2", "table1:k3", "table1:k4", "table1:k5", "table1:k6"]


def _manifold(name: str, shift: float) -> dict:
    return dict(
        name=name,
        dataset={"synthetic": {"kind": "shifted-manifold", "n": 1400, "shift": shift}},
        kernels=[{"name": "inverse-distance"}],
        methods=[DD_FPS, ACA, SVD],
        ranks=list(range(5, 61, 5)),
        repeats=1,
        notes="half-shell + cubes, Y = X + (0, 0, shift), kernel 1/|x-y|",
    )


def _mixture(d: int, m: int, n: int, clusters: int, **extra) -> dict:
    spec = {"kind": "gaussian-mixture", "d": d, "m": m, "n": n, "clusters": clusters}
    if extra:
        spec["extra"] = extra
    return {"synthetic": spec}


#: the gas-sensor features are strongly correlated; its stand-in lives near
#: a 5-dimensional subspace of R^128, so Gaussian kernel blocks are
#: numerically low rank and the pseudoinverse stabilization matters
GAS_INTRINSIC_DIM = 5


def _gas(name, methods, ranks, notes):
    return dict(
        name=name,
        dataset=_mixture(128, 1600, 2000, 10, intrinsic_dim=GAS_INTRINSIC_DIM),
        kernels=[{"name": "gaussian", "sigma_frac": 1.0}],
        methods=methods,
        ranks=ranks,
        repeats=1,
        notes=notes,
    )


def _selector_methods():
    out = []
    for label, sel in (("ANC", {"method": "anchor"}), ("FPS", {"method": "fps"}),
                       ("Unif", {"method": "uniform"}),
                       ("mixed1", {"method": "mixed", "fps_fraction": 0.05}),
                       ("mixed2", {"method": "mixed", "fps_fraction": 0.10}),
                       ("mixed3", {"method": "mixed", "fps_fraction": 0.50})):
        out.append({"label": f"DD2-{label}", "algorithm": "two-sided", "selector": sel, "stabilize": True})
    return out


def _covertype():
    return dict(
        name="test4-covertype",
        dataset=_mixture(54, 2000, 2500, 8),
        kernels=[{"name": "gaussian", "sigma_frac": f} for f in (1.0, 0.5, 0.25)],
        methods=[DD_ANC, DD_FPS, ACA],
        ranks=[10, 50, 100, 150, 200],
        seeds=[0, 1, 2, 3, 4],
        repeats=1,
        notes="clustered stand-in for Covertype (d=54); sigma = 100/50/25% of radius(X)",
    )


def _gas_test4():
    return dict(
        name="test4-gas",
        dataset=_mixture(128, 2000, 2500, 10, intrinsic_dim=GAS_INTRINSIC_DIM),
        kernels=[{"name": "gaussian", "sigma_frac": f} for f in (1.0, 0.5, 0.25)],
        methods=[DD_ANC, DD_FPS, ACA],
        ranks=[10, 50, 100, 150, 200],
        repeats=1,
        notes="clustered stand-in for Gas Sensor Array Drift (d=128)",
    )


_PRESETS = {
    "exp1-indicator": lambda: dict(
        name="exp1-indicator",
        kind="indicators",
        dataset={"synthetic": {"kind": "cored-clusters", "m": 50, "n": 100, "d": 2, "seed": 0}},
        kernels=[{"name": "log-distance"}],
        methods=[{"label": "Choice1-Unif", "algorithm": "two-sided", "selector": {"method": "uniform"},
                  "stabilize": False},
                 {"label": "Choice2-FPS", "algorithm": "two-sided", "selector": {"method": "fps"},
                  "stabilize": False}],
        ranks=[4, 6, 8, 10, 12],
        repeats=1,
        norms=["max"],
        notes="log|x-y| on two cored point clouds (50 and 100 points); uniform vs FPS subsets",
    ),
    "exp2-indicator": lambda: dict(
        name="exp2-indicator",
        kind="indicators",
        dataset={"synthetic": {"kind": "uniform-boxes", "n": 200, "d": 2, "seed": 0,
                               "extra": {"side": 0.3}}, "y_rule": "same"},
        kernels=[{"name": "gaussian", "params": {"sigma": 0.3}}],
        methods=[{"label": "Choice1-Unif", "algorithm": "two-sided", "selector": {"method": "uniform"},
                  "stabilize": False},
                 {"label": "Choice2-FPS", "algorithm": "two-sided", "selector": {"method": "fps"},
                  "stabilize": False}],
        ranks=[2, 4, 6, 8, 10, 12, 15, 20, 25, 30],
        indicator_ranks_above=5,
        repeats=1,
        norms=["max"],
        notes="exp(-|x-y|^2/0.09) on 200 points in [0, 0.3]^2, Y = X, S1 = S2",
    ),
    "test1-dataset1": lambda: _manifold("test1-dataset1", 2.7),
    "test1-dataset2": lambda: _manifold("test1-dataset2", 2.0),
    "test1-dataset3": lambda: _manifold("test1-dataset3", 0.5),
    "test2-selectors": lambda: _gas(
        "test2-selectors", _selector_methods(), [10, 30, 50, 70, 90, 110, 130, 150],
        "two-sided, stabilized, six selectors on the Gas stand-in (d=128), sigma = radius(X)"),
    "test3": lambda: _gas(
        "test3",
        [{"label": f"DD{k}-{lab}", "algorithm": alg, "selector": {"method": sel},
          **({"stabilize": True} if alg == "two-sided" else {})}
         for k, alg in ((1, "one-sided"), (2, "two-sided"))
         for lab, sel in (("Unif", "uniform"), ("ANC", "anchor"), ("FPS", "fps"))],
        [10, 30, 50, 70, 90, 110, 130, 150],
        "one-sided vs two-sided on the Gas stand-in (d=128)"),
    "test4-covertype": _covertype,
    "test4-gas": _gas_test4,
    "test5-scaling": lambda: dict(
        name="test5-scaling",
        kind="scaling",
        dataset={"synthetic": {"kind": "uniform-boxes"}},
        kernels=[{"name": "log-distance"}],
        methods=[DD_FPS],
        ranks=[],
        scaling=ScalingConfig(),
        repeats=10,
        notes="X ~ U[0,1]^d, Y ~ U[2,3]^d, log|x-y|, one-sided FPS at fixed rank",
    ),
    "test6-kernels": lambda: dict(
        name="test6-kernels",
        dataset={"synthetic": {"kind": "gaussian-mixture", "d": 561, "m": 2000, "n": 2000,
                               "clusters": 6}, "y_rule": "shift-2R/sqrt(d)"},
        kernels=[{"name": k} for k in BENCH_KERNELS],
        methods=[ACA, DD_FPS, DD_ANC],
        ranks=[10, 50, 90, 130, 170, 210, 250],
        seeds=[0, 1, 2, 3, 4],
        repeats=1,
        notes="six kernels on a d=561 stand-in; Y = X + 2R/sqrt(d) in every coordinate",
    ),
}

PRESET_DOCS = {name: fn()["notes"] for name, fn in _PRESETS.items()}


def preset_names() -> list[str]:
    return sorted(_PRESETS)


def preset(name: str, csv: Optional[str] = None) -> ExperimentConfig:
    """The named configuration. ``csv`` points the dataset-backed presets
    (test2, test3, test4-*, test6) at a local copy of the real data."""
    try:
        fn = _PRESETS[name]
    except KeyError:
        raise KeyError(f"unknown preset {name!r}; available: {', '.join(preset_names())}") from None
    cfg = fn()
    if csv is not None:
        ds = cfg["dataset"]
        sub = dict(ds.get("synthetic") or ds.get("substitute"))
        cfg["dataset"] = {"csv": csv, "substitute": sub, "standardize": True,
                          "m": sub.get("m"), "n": sub.get("n"), "y_rule": ds.get("y_rule")}
    return ExperimentConfig(**cfg)
