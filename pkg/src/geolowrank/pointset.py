"""Point sets in R^d, the closeness statistic delta, and dataset generators.

Every array handled here is an ``(n, d)`` float64 array, one point per row.
Random draws always go through ``numpy.random.default_rng(seed)`` with an
explicit integer seed; nothing touches global RNG state.
"""
from __future__ import annotations

import csv
import math
import warnings
from dataclasses import dataclass, field
from functools import cached_property
from pathlib import Path
from typing import Optional, Union

import numpy as np
from scipy.spatial.distance import cdist

__all__ = [
    "PointSet",
    "SubsetSelection",
    "StandardizationRecord",
    "SyntheticSpec",
    "as_array",
    "distance",
    "delta",
    "standardize",
    "subsample_without_replacement",
    "generate_synthetic",
    "gaussian_mixture",
    "cored_cluster",
    "load_csv",
    "SYNTHETIC_KINDS",
]

# Chunk size (rows) for the min-distance sweeps, keeps temporaries ~ 8 MB.
_CHUNK_ELEMS = 1_000_000


@dataclass(frozen=True, eq=False)
class PointSet:
    """An immutable ordered set of points in R^d."""

    points: np.ndarray
    label: Optional[str] = None

    def __post_init__(self):
        pts = np.array(self.points, dtype=np.float64, copy=True)
        if pts.ndim == 1:
            pts = pts[:, None]
        if pts.ndim != 2 or pts.shape[1] < 1:
            raise ValueError(f"points must be an (n, d) array, got shape {pts.shape}")
        pts.setflags(write=False)
        object.__setattr__(self, "points", pts)

    @property
    def dim(self) -> int:
        return self.points.shape[1]

    def __len__(self) -> int:
        return self.points.shape[0]

    def __getitem__(self, idx):
        return self.points[idx]

    def take(self, indices, label=None) -> "PointSet":
        return PointSet(self.points[np.asarray(indices, dtype=np.intp)], label=label)

    def __repr__(self):
        tag = f", label={self.label!r}" if self.label else ""
        return f"PointSet(n={len(self)}, d={self.dim}{tag})"


@dataclass(frozen=True, eq=False)
class SubsetSelection:
    """Indices into a source point set plus how they were chosen.

    ``method`` is one of ``"fps"``, ``"uniform"``, ``"mixed"``, ``"anchor"``
    or ``"explicit"``.
    """

    source: PointSet
    indices: np.ndarray
    method: str = "explicit"
    seed: Optional[int] = None
    fps_fraction: Optional[float] = None

    def __post_init__(self):
        idx = np.array(self.indices, dtype=np.intp, copy=True).ravel()
        n = len(self.source)
        if idx.size and (idx.min() < 0 or idx.max() >= n):
            raise IndexError(f"subset indices out of range for a set of {n} points")
        if np.unique(idx).size != idx.size:
            raise ValueError("subset indices must be distinct")
        idx.setflags(write=False)
        object.__setattr__(self, "indices", idx)

    def __len__(self) -> int:
        return self.indices.size

    @property
    def points(self) -> np.ndarray:
        return self.source.points[self.indices]

    @cached_property
    def delta(self) -> float:
        """delta(source, self)."""
        return delta(self.source, self)

    def prefix(self, k: int) -> "SubsetSelection":
        return SubsetSelection(self.source, self.indices[:k], self.method, self.seed, self.fps_fraction)


@dataclass(frozen=True)
class StandardizationRecord:
    mean: np.ndarray
    scale: np.ndarray
    constant_dims: tuple = ()

    @property
    def warned(self) -> bool:
        return bool(self.constant_dims)

    def apply(self, raw) -> np.ndarray:
        return (as_array(raw) - self.mean) / self.scale

    def invert(self, standardized) -> np.ndarray:
        return as_array(standardized) * self.scale + self.mean


def as_array(obj) -> np.ndarray:
    """Coerce a PointSet, SubsetSelection or array-like to an (n, d) array."""
    if isinstance(obj, (PointSet, SubsetSelection)):
        return obj.points
    arr = np.asarray(obj, dtype=np.float64)
    if arr.ndim == 1:
        arr = arr[:, None]
    return arr


def distance(a, b) -> float:
    a = np.asarray(a, dtype=np.float64).ravel()
    b = np.asarray(b, dtype=np.float64).ravel()
    if a.shape != b.shape:
        raise ValueError(f"dimension mismatch: {a.size} vs {b.size}")
    return float(np.sqrt(np.sum((a - b) ** 2)))


def min_distances(Z, S) -> np.ndarray:
    """For each point of Z, the distance to its nearest point of S."""
    Z = as_array(Z)
    S = as_array(S)
    if S.shape[0] == 0:
        raise ValueError("the subset S is empty")
    if Z.shape[1] != S.shape[1]:
        raise ValueError(f"dimension mismatch: {Z.shape[1]} vs {S.shape[1]}")
    out = np.empty(Z.shape[0])
    step = max(1, _CHUNK_ELEMS // max(1, S.shape[0]))
    for lo in range(0, Z.shape[0], step):
        out[lo:lo + step] = cdist(Z[lo:lo + step], S).min(axis=1)
    return out


def delta(Z, S) -> float:
    """max over z in Z of dist(z, S)."""
    return float(min_distances(Z, S).max(initial=0.0))


def standardize(raw) -> tuple[PointSet, StandardizationRecord]:
    """Shift to zero mean and scale to unit (population) variance per dimension.

    A dimension with zero variance keeps scale 1 and is reported in
    ``record.constant_dims`` together with a ``RuntimeWarning``.
    """
    X = as_array(raw)
    if X.shape[0] < 2:
        raise ValueError("standardization needs at least 2 points")
    mean = X.mean(axis=0)
    scale = X.std(axis=0)
    const = tuple(int(i) for i in np.flatnonzero(scale == 0.0))
    if const:
        warnings.warn(f"constant dimensions {const} left unscaled", RuntimeWarning, stacklevel=2)
        scale = np.where(scale == 0.0, 1.0, scale)
    rec = StandardizationRecord(mean=mean, scale=scale, constant_dims=const)
    label = raw.label if isinstance(raw, PointSet) else None
    return PointSet(rec.apply(X), label=label), rec


def subsample_without_replacement(ps: PointSet, k: int, seed: int) -> PointSet:
    n = len(ps)
    if not 0 <= k <= n:
        raise ValueError(f"cannot draw {k} points from a set of {n}")
    idx = np.random.default_rng(seed).choice(n, size=k, replace=False)
    return ps.take(idx, label=ps.label)


def load_csv(path: Union[str, Path], label=None) -> PointSet:
    """Numeric CSV, one point per row. A leading non-numeric row is a header."""
    rows = []
    with open(path, newline="") as fh:
        for lineno, row in enumerate(csv.reader(fh)):
            if not row or all(not c.strip() for c in row):
                continue
            try:
                rows.append([float(c) for c in row])
            except ValueError:
                if lineno == 0 and not rows:
                    continue
                raise ValueError(f"{path}:{lineno + 1}: non-numeric row") from None
    if not rows:
        raise ValueError(f"{path}: no data rows")
    if len({len(r) for r in rows}) != 1:
        raise ValueError(f"{path}: rows have differing lengths")
    return PointSet(np.array(rows), label=label or Path(path).stem)


# --- synthetic geometries -------------------------------------------------

SYNTHETIC_KINDS = ("shifted-manifold", "uniform-boxes", "two-clusters-2d", "gaussian-mixture",
                   "cored-clusters")

# Half-shell + cubes constants: the unit half-shell z <= 0 (a bowl opening
# upwards) centered at the origin, and four cubes of side 0.2 centered at
# (+-0.4, +-0.4, 0.6) above it. The vertical extent of X is 1.7, so the
# Y = X + (0, 0, h) copy sits about 1 unit above X for h = 2.7 (its bowl
# faces the cubes of X), 0.4 for h = 2, and interleaves with X for h = 0.5.
SHELL_POINTS = 1000
CUBE_POINTS = 100
CUBE_SIDE = 0.2
CUBE_CENTERS = np.array([
    [0.4, 0.4, 0.6],
    [-0.4, 0.4, 0.6],
    [-0.4, -0.4, 0.6],
    [0.4, -0.4, 0.6],
])


@dataclass(frozen=True)
class SyntheticSpec:
    """Parameters of a synthetic (X, Y) pair.

    kind: one of SYNTHETIC_KINDS.
    n, m: sizes of Y and X (m defaults to n). The shifted manifold splits
       its points between shell and cubes in the ratio 1000 : 4 x 100.
    extra: kind-specific options. uniform-boxes: ``side`` (default 1) scales
       both boxes, X ~ U[0, side]^d and Y ~ side * U[2, 3]^d.
       cored-clusters: see :func:`cored_cluster`; ``offset`` (default 2.5)
       is the distance between the two cores along the first axis.
       gaussian-mixture: passed on to :func:`gaussian_mixture`.
    """

    kind: str
    n: int = 1400
    m: Optional[int] = None
    d: int = 3
    shift: float = 2.7
    seed: int = 0
    clusters: int = 8
    extra: dict = field(default_factory=dict)


def _half_shell_and_cubes(n: int, rng: np.random.Generator) -> np.ndarray:
    n_shell = round(n * SHELL_POINTS / (SHELL_POINTS + 4 * CUBE_POINTS))
    n_cubes = n - n_shell
    v = rng.standard_normal((n_shell, 3))
    v /= np.linalg.norm(v, axis=1, keepdims=True)
    v[:, 2] = -np.abs(v[:, 2])
    per = np.full(4, n_cubes // 4)
    per[: n_cubes % 4] += 1
    cubes = [c + CUBE_SIDE * (rng.random((k, 3)) - 0.5) for c, k in zip(CUBE_CENTERS, per)]
    return np.vstack([v, *cubes])


def gaussian_mixture(n: int, d: int, clusters: int, seed: int, *, center_scale=3.0,
                     spread=(0.05, 0.6), weight_concentration=0.7,
                     intrinsic_dim: Optional[int] = None, ambient_noise=1e-3) -> np.ndarray:
    """Clustered point cloud: ``clusters`` isotropic Gaussians of varied width
    and Dirichlet-distributed weights. Used as a stand-in for real data sets.

    With ``intrinsic_dim = k`` the mixture is drawn in R^k, mapped into R^d
    by a random orthonormal basis and perturbed by isotropic noise of size
    ``ambient_noise``: strongly correlated features, as in sensor data,
    which makes Gaussian kernel matrices numerically low rank.
    """
    rng = np.random.default_rng(seed)
    k = d if intrinsic_dim is None else int(intrinsic_dim)
    if not 1 <= k <= d:
        raise ValueError(f"intrinsic_dim must lie in [1, {d}]")
    centers = center_scale * rng.standard_normal((clusters, k))
    widths = np.exp(rng.uniform(np.log(spread[0]), np.log(spread[1]), clusters))
    weights = rng.dirichlet(np.full(clusters, weight_concentration))
    labels = rng.choice(clusters, size=n, p=weights)
    Z = centers[labels] + widths[labels, None] * rng.standard_normal((n, k))
    if k == d:
        return Z
    basis = np.linalg.qr(rng.standard_normal((d, k)))[0]
    return Z @ basis.T + ambient_noise * rng.standard_normal((n, d))


def cored_cluster(n: int, d: int, rng: np.random.Generator, *, core_fraction=0.8,
                  core_width=0.08, halo=1.0) -> np.ndarray:
    """A dense Gaussian core at the origin holding ``core_fraction`` of the
    points, the rest uniform in the cube [-halo, halo]^d around it. Uniform
    sampling mostly lands in the core and leaves the halo uncovered."""
    k = int(core_fraction * n)
    return np.vstack([core_width * rng.standard_normal((k, d)),
                      halo * (2.0 * rng.random((n - k, d)) - 1.0)])


def generate_synthetic(spec: SyntheticSpec) -> tuple[PointSet, PointSet]:
    rng = np.random.default_rng(spec.seed)
    m = spec.m if spec.m is not None else spec.n
    if spec.kind == "shifted-manifold":
        X = _half_shell_and_cubes(m, rng)
        base = X if m == spec.n else _half_shell_and_cubes(spec.n, rng)
        Y = base + np.array([0.0, 0.0, spec.shift])
    elif spec.kind == "uniform-boxes":
        side = spec.extra.get("side", 1.0)
        X = side * rng.random((m, spec.d))
        Y = side * (2.0 + rng.random((spec.n, spec.d)))
    elif spec.kind == "two-clusters-2d":
        X = _two_clusters(m, rng)
        Y = _two_clusters(spec.n, rng)
    elif spec.kind == "cored-clusters":
        opts = dict(spec.extra)
        shift = np.zeros(spec.d)
        shift[0] = opts.pop("offset", 2.5)
        X = cored_cluster(m, spec.d, rng, **opts)
        Y = shift + cored_cluster(spec.n, spec.d, rng, **opts)
    elif spec.kind == "gaussian-mixture":
        pool = gaussian_mixture(m + spec.n, spec.d, spec.clusters, spec.seed, **spec.extra)
        pool, _ = standardize(pool)
        perm = rng.permutation(m + spec.n)
        X, Y = pool.points[perm[:m]], pool.points[perm[m:]]
    else:
        raise ValueError(f"unknown synthetic kind {spec.kind!r}; choose from {SYNTHETIC_KINDS}")
    return PointSet(X, label=f"{spec.kind}:X"), PointSet(Y, label=f"{spec.kind}:Y")


def _two_clusters(n: int, rng: np.random.Generator) -> np.ndarray:
    # 85% of the mass in a tight blob, 15% in a wide one: uniform sampling
    # then over-represents the dense blob.
    n_dense = math.ceil(0.85 * n)
    dense = np.array([0.0, 0.0]) + 0.08 * rng.standard_normal((n_dense, 2))
    wide = np.array([1.5, 0.8]) + 0.45 * rng.standard_normal((n - n_dense, 2))
    return np.vstack([dense, wide])
