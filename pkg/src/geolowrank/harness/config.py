"""Experiment configuration: dataclasses, YAML loading, and content hashing.

A config file is YAML with a ``schema_version`` field (currently 1)::

    schema_version: 1
    name: my-run
    kind: sweep                 # sweep | indicators | scaling
    dataset:
      synthetic: {kind: shifted-manifold, n: 1400, shift: 2.7}
      # or:  csv: data/covtype.csv   (+ optional csv_y, substitute: {...})
      standardize: false
      m: null                   # subsample sizes (csv data only)
      n: null
      y_rule: null              # null | same | shift-2R/sqrt(d)
    kernels:
      - {name: inverse-distance}
      - {name: gaussian, sigma_frac: 0.25}
    methods:
      - {label: DD-FPS, algorithm: one-sided, selector: {method: fps}}
      - {label: ACA, algorithm: aca}
      - {label: SVD, algorithm: svd-floor}
    ranks: [10, 20, 30]
    norms: [rel2]
    seeds: [0]
    repeats: 1
    output: {csv: out.csv, json: out.json}
"""
from __future__ import annotations

import hashlib
import json
from dataclasses import MISSING, asdict, dataclass, field, fields
from pathlib import Path
from typing import Optional, Union

import yaml

from ..kernels import kernel_names
from ..selectors import SelectorConfig

__all__ = [
    "SCHEMA_VERSION",
    "ConfigError",
    "DatasetConfig",
    "KernelConfig",
    "MethodConfig",
    "ScalingConfig",
    "ExperimentConfig",
    "load_config",
    "ALGORITHMS",
    "KINDS",
    "Y_RULES",
]

SCHEMA_VERSION = 1
ALGORITHMS = ("one-sided", "two-sided", "symmetric", "aca", "svd-floor")
KINDS = ("sweep", "indicators", "scaling")
Y_RULES = (None, "same", "shift-2R/sqrt(d)")
NORMS = ("rel2", "max")


class ConfigError(ValueError):
    pass


def _build(cls, data, where):
    if data is None:
        data = {}
    if not isinstance(data, dict):
        raise ConfigError(f"{where}: expected a mapping, got {type(data).__name__}")
    known = {f.name for f in fields(cls)}
    extra = set(data) - known
    if extra:
        raise ConfigError(f"{where}: unknown keys {sorted(extra)}; allowed {sorted(known)}")
    missing = sorted(f.name for f in fields(cls) if f.name not in data
                     and f.default is MISSING and f.default_factory is MISSING)
    if missing:
        raise ConfigError(f"{where}: missing required keys {missing}")
    return cls(**data)


@dataclass
class DatasetConfig:
    synthetic: Optional[dict] = None     # SyntheticSpec fields
    csv: Optional[str] = None            # X (and Y if csv_y absent)
    csv_y: Optional[str] = None
    substitute: Optional[dict] = None    # synthetic stand-in when csv is missing
    standardize: bool = False
    m: Optional[int] = None
    n: Optional[int] = None
    y_rule: Optional[str] = None

    def __post_init__(self):
        if self.synthetic is None and self.csv is None:
            raise ConfigError("dataset: give either 'synthetic' or 'csv'")
        if self.y_rule not in Y_RULES:
            raise ConfigError(f"dataset.y_rule must be one of {Y_RULES}")


@dataclass
class KernelConfig:
    name: str
    params: dict = field(default_factory=dict)
    sigma_frac: Optional[float] = None   # gaussian only: sigma = frac * radius(X)

    def __post_init__(self):
        if self.name not in kernel_names():
            raise ConfigError(f"unknown kernel {self.name!r}; known: {kernel_names()}")


@dataclass
class MethodConfig:
    label: str
    algorithm: str
    selector: dict = field(default_factory=dict)   # SelectorConfig fields
    oversample: float = 2.0
    side: str = "sample-y"
    stabilize: Optional[bool] = None
    eps: float = 1e-10

    def __post_init__(self):
        if self.algorithm not in ALGORITHMS:
            raise ConfigError(f"method {self.label!r}: algorithm must be one of {ALGORITHMS}")
        try:
            SelectorConfig(**self.selector)
        except TypeError as exc:
            raise ConfigError(f"method {self.label!r}: bad selector {self.selector}: {exc}") from exc

    def selector_config(self, seed: int) -> SelectorConfig:
        opts = dict(self.selector)
        opts.setdefault("seed", seed)
        return SelectorConfig(**opts)


@dataclass
class ScalingConfig:
    sizes: list = field(default_factory=lambda: [10_000, 20_000, 40_000, 80_000])
    dims: list = field(default_factory=lambda: [3, 10, 50])
    rank: int = 20
    error_max_n: int = 4000   # estimate the error only up to this size


@dataclass
class ExperimentConfig:
    name: str
    dataset: DatasetConfig
    kernels: list
    methods: list
    ranks: list
    kind: str = "sweep"
    norms: list = field(default_factory=lambda: ["rel2"])
    seeds: list = field(default_factory=lambda: [0])
    repeats: int = 10
    error_guard: int = 10 ** 8
    output: dict = field(default_factory=dict)
    scaling: Optional[ScalingConfig] = None
    indicator_ranks_above: int = 0      # indicators: ranks asserted by acceptance
    notes: str = ""
    schema_version: int = SCHEMA_VERSION

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ConfigError(f"kind must be one of {KINDS}")
        if self.schema_version != SCHEMA_VERSION:
            raise ConfigError(f"unsupported schema_version {self.schema_version}; expected {SCHEMA_VERSION}")
        if isinstance(self.dataset, dict):
            self.dataset = _build(DatasetConfig, self.dataset, "dataset")
        self.kernels = [k if isinstance(k, KernelConfig) else _build(KernelConfig, k, f"kernels[{i}]")
                        for i, k in enumerate(self.kernels)]
        self.methods = [mc if isinstance(mc, MethodConfig) else _build(MethodConfig, mc, f"methods[{i}]")
                        for i, mc in enumerate(self.methods)]
        if isinstance(self.scaling, dict):
            self.scaling = _build(ScalingConfig, self.scaling, "scaling")
        if not self.kernels:
            raise ConfigError("at least one kernel is required")
        ranks = [int(r) for r in self.ranks]
        if any(b <= a for a, b in zip(ranks, ranks[1:])):
            raise ConfigError(f"rank grid must be strictly increasing, got {ranks}")
        if ranks and ranks[0] < 1:
            raise ConfigError("ranks must be positive")
        self.ranks = ranks
        bad = set(self.norms) - set(NORMS)
        if bad:
            raise ConfigError(f"unknown norms {sorted(bad)}; choose from {NORMS}")
        if self.repeats < 1:
            raise ConfigError("repeats must be at least 1")

    # -- serialization -------------------------------------------------------

    def to_dict(self) -> dict:
        return asdict(self)

    def to_yaml(self) -> str:
        return yaml.safe_dump(self.to_dict(), sort_keys=False)

    def hash(self) -> str:
        """Digest of everything that determines the error columns.

        Output paths and the timing repeat count are excluded: changing
        them does not change the computed errors.
        """
        d = self.to_dict()
        for key in ("output", "repeats", "notes"):
            d.pop(key, None)
        blob = json.dumps(d, sort_keys=True, default=str).encode()
        return hashlib.sha256(blob).hexdigest()[:16]

    @classmethod
    def from_dict(cls, data: dict) -> "ExperimentConfig":
        if not isinstance(data, dict):
            raise ConfigError("config must be a mapping")
        if "schema_version" not in data:
            raise ConfigError("config is missing 'schema_version'")
        return _build(cls, data, "config")


def load_config(path: Union[str, Path]) -> ExperimentConfig:
    with open(path) as fh:
        data = yaml.safe_load(fh)
    return ExperimentConfig.from_dict(data)
