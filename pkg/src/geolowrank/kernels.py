"""Kernel registry and lazy evaluation of kernel matrices K_{XY}.

A kernel is registered once as a vectorised function of two point blocks.
:class:`KernelMatrixHandle` pairs a kernel with the point sets X and Y and
evaluates entries, rows, columns and sub-blocks on demand; the full matrix
is only built by :meth:`KernelMatrixHandle.dense`, behind a size guard.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Mapping, Optional

import numpy as np
from scipy.spatial.distance import cdist

from .pointset import PointSet, as_array

__all__ = [
    "KernelDef",
    "KernelSpec",
    "KernelMatrixHandle",
    "SingularKernelError",
    "DeskScaleError",
    "register_kernel",
    "kernel_names",
    "eval_entry",
    "eval_block",
    "derive_params",
    "parse_kernel",
    "radius",
    "max_pairwise_sq_distance",
    "DENSE_GUARD",
]

#: largest m * n for which dense kernel matrices are formed.
DENSE_GUARD = 10**8


class SingularKernelError(ValueError):
    """A kernel singular at coincident points was evaluated at |x - y| = 0."""


class DeskScaleError(ValueError):
    """The requested dense computation exceeds the configured size guard."""


@dataclass(frozen=True)
class KernelDef:
    name: str
    params: tuple
    func: Callable
    symmetric: bool = True
    singular_at_zero: bool = False
    needs_sq_dist: bool = True
    description: str = ""


_REGISTRY: dict[str, KernelDef] = {}
_ALIASES = {
    "table1:k1": "distance",
    "table1:k2": "log-distance",
    "table1:k3": "rational-quadratic",
    "table1:k4": "bump-exp",
    "table1:k5": "anisotropic-inverse",
    "table1:k6": "poly123",
}


def register_kernel(kdef: KernelDef) -> KernelDef:
    if kdef.name in _REGISTRY:
        raise ValueError(f"kernel {kdef.name!r} already registered")
    _REGISTRY[kdef.name] = kdef
    return kdef


def kernel_names() -> list[str]:
    return sorted(_REGISTRY) + sorted(_ALIASES)


def _lookup(name: str) -> KernelDef:
    key = _ALIASES.get(name, name)
    try:
        return _REGISTRY[key]
    except KeyError:
        raise ValueError(f"unknown kernel {name!r}; known: {kernel_names()}") from None


# Each func receives (A, B, D2, params) where D2 is the squared distance block
# (or None when needs_sq_dist is False).

def _inverse(A, B, D2, p):
    return 1.0 / np.sqrt(D2)


def _distance(A, B, D2, p):
    return np.sqrt(D2)


def _log_distance(A, B, D2, p):
    return 0.5 * np.log(D2)


def _gaussian(A, B, D2, p):
    return np.exp(-D2 / p["sigma"] ** 2)


def _rational_quadratic(A, B, D2, p):
    return 1.0 / (1.0 + D2 / p["R"] ** 2)


def _bump_exp(A, B, D2, p):
    t = p["c"] * D2
    if np.any(t >= 1.0):
        raise ValueError("bump-exp kernel needs c |x - y|^2 < 1 on every evaluated pair")
    return np.exp(-1.0 / (1.0 - t))


def _anisotropic_inverse(A, B, D2, p):
    return A[:, :1] / np.sqrt(D2)


def _poly123(A, B, D2, p):
    t = A @ B.T
    return t + t * t + t * t * t


for _k in (
    KernelDef("inverse-distance", (), _inverse, singular_at_zero=True, description="1/|x-y|"),
    KernelDef("distance", (), _distance, description="|x-y|"),
    KernelDef("log-distance", (), _log_distance, singular_at_zero=True, description="log|x-y|"),
    KernelDef("gaussian", ("sigma",), _gaussian, description="exp(-|x-y|^2/sigma^2)"),
    KernelDef("rational-quadratic", ("R",), _rational_quadratic, description="(1+|x-y|^2/R^2)^-1"),
    KernelDef("bump-exp", ("c",), _bump_exp, description="exp(-1/(1-c|x-y|^2))"),
    KernelDef("anisotropic-inverse", (), _anisotropic_inverse, symmetric=False,
              singular_at_zero=True, description="x_1/|x-y|"),
    KernelDef("poly123", (), _poly123, needs_sq_dist=False, description="t+t^2+t^3, t=x.y"),
):
    register_kernel(_k)


@dataclass(frozen=True)
class KernelSpec:
    """A registered kernel name with its parameter values."""

    name: str
    params: Mapping[str, float] = field(default_factory=dict)

    def __post_init__(self):
        kdef = _lookup(self.name)
        object.__setattr__(self, "name", kdef.name)
        params = {k: float(v) for k, v in dict(self.params).items()}
        missing = set(kdef.params) - set(params)
        extra = set(params) - set(kdef.params)
        if missing or extra:
            raise ValueError(f"kernel {kdef.name!r} takes parameters {kdef.params}, got {sorted(params)}")
        for key in ("sigma", "R", "c"):
            if key in params and not params[key] > 0:
                raise ValueError(f"{key} must be positive")
        object.__setattr__(self, "params", params)

    @property
    def definition(self) -> KernelDef:
        return _REGISTRY[self.name]

    @property
    def symmetric(self) -> bool:
        return self.definition.symmetric

    @property
    def label(self) -> str:
        if not self.params:
            return self.name
        inner = ",".join(f"{k}={v:.6g}" for k, v in sorted(self.params.items()))
        return f"{self.name}({inner})"

    def __call__(self, A, B) -> np.ndarray:
        """Kernel block [kappa(a, b)] for rows a of A and rows b of B."""
        A = as_array(A)
        B = as_array(B)
        kdef = self.definition
        D2 = None
        if kdef.needs_sq_dist or kdef.singular_at_zero:
            D2 = cdist(A, B, "sqeuclidean")
            if kdef.singular_at_zero:
                hits = np.argwhere(D2 == 0.0)
                if hits.size:
                    i, j = hits[0]
                    raise SingularKernelError(
                        f"{kdef.name} is singular at coincident points (block pair ({i}, {j}))")
        return kdef.func(A, B, D2, self.params)

    def entry(self, x, y) -> float:
        return float(self(np.atleast_2d(x), np.atleast_2d(y))[0, 0])


class KernelMatrixHandle:
    """Lazy view of K_{XY} = [kappa(x_i, y_j)]."""

    def __init__(self, kernel: KernelSpec, X, Y=None):
        self.kernel = kernel
        self.X = X if isinstance(X, PointSet) else PointSet(X)
        self.Y = self.X if Y is None else (Y if isinstance(Y, PointSet) else PointSet(Y))
        if self.X.dim != self.Y.dim:
            raise ValueError(f"X and Y dimensions differ: {self.X.dim} vs {self.Y.dim}")

    @property
    def shape(self) -> tuple[int, int]:
        return len(self.X), len(self.Y)

    @property
    def same_points(self) -> bool:
        return self.X is self.Y or (
            self.X.points.shape == self.Y.points.shape and np.array_equal(self.X.points, self.Y.points))

    def transpose(self) -> "KernelMatrixHandle":
        """Handle for K_{YX} with kernel (y, x) -> kappa(x, y)."""
        if not self.kernel.symmetric:
            return _TransposedHandle(self)
        return KernelMatrixHandle(self.kernel, self.Y, self.X)

    def block(self, rows=None, cols=None) -> np.ndarray:
        A = self.X.points if rows is None else self.X.points[np.asarray(rows, dtype=np.intp)]
        B = self.Y.points if cols is None else self.Y.points[np.asarray(cols, dtype=np.intp)]
        try:
            return self.kernel(A, B)
        except SingularKernelError as exc:
            raise SingularKernelError(self._locate(rows, cols, exc)) from None

    def _locate(self, rows, cols, exc) -> str:
        A = self.X.points if rows is None else self.X.points[np.asarray(rows, dtype=np.intp)]
        B = self.Y.points if cols is None else self.Y.points[np.asarray(cols, dtype=np.intp)]
        i, j = np.argwhere(cdist(A, B, "sqeuclidean") == 0.0)[0]
        gi = int(i) if rows is None else int(np.asarray(rows)[i])
        gj = int(j) if cols is None else int(np.asarray(cols)[j])
        return f"{self.kernel.name} is singular at coincident points x[{gi}] == y[{gj}]"

    def entry(self, i: int, j: int) -> float:
        return float(self.block([i], [j])[0, 0])

    def row(self, i: int) -> np.ndarray:
        return self.block([i], None)[0]

    def col(self, j: int) -> np.ndarray:
        return self.block(None, [j])[:, 0]

    def dense(self, guard: int = DENSE_GUARD) -> np.ndarray:
        m, n = self.shape
        if m * n > guard:
            raise DeskScaleError(f"dense {m}x{n} kernel matrix exceeds the size guard {guard}")
        return self.block()

    def matvec(self, v: np.ndarray, chunk: int = 2048) -> np.ndarray:
        """K v computed by row chunks without forming K."""
        v = np.asarray(v, dtype=np.float64)
        out = np.empty((self.shape[0],) + v.shape[1:])
        for lo in range(0, self.shape[0], chunk):
            out[lo:lo + chunk] = self.block(np.arange(lo, min(lo + chunk, self.shape[0]))) @ v
        return out

    def rmatvec(self, v: np.ndarray, chunk: int = 2048) -> np.ndarray:
        v = np.asarray(v, dtype=np.float64)
        out = np.zeros((self.shape[1],) + v.shape[1:])
        for lo in range(0, self.shape[0], chunk):
            hi = min(lo + chunk, self.shape[0])
            out += self.block(np.arange(lo, hi)).T @ v[lo:hi]
        return out


class _TransposedHandle(KernelMatrixHandle):
    """K_{YX} for a non-symmetric kernel: entry (j, i) = kappa(x_i, y_j)."""

    def __init__(self, parent: KernelMatrixHandle):
        self.parent = parent
        self.kernel = parent.kernel
        self.X = parent.Y
        self.Y = parent.X

    def block(self, rows=None, cols=None) -> np.ndarray:
        return self.parent.block(cols, rows).T

    def transpose(self) -> KernelMatrixHandle:
        return self.parent


def eval_entry(h: KernelMatrixHandle, i: int, j: int) -> float:
    return h.entry(i, j)


def eval_block(h: KernelMatrixHandle, rows=None, cols=None) -> np.ndarray:
    return h.block(rows, cols)


# --- parameter derivation -------------------------------------------------

def radius(X) -> float:
    """Largest distance of a point of X from the origin.

    On standardized data the origin is the mean, so this is the radius of
    X about its center.
    """
    P = as_array(X)
    if P.shape[0] == 0:
        raise ValueError("empty point set")
    return float(np.sqrt(np.einsum("ij,ij->i", P, P).max()))


def max_pairwise_sq_distance(X, Y, exact_limit: int = 10**8, sample_pairs: int = 10**6,
                             seed: int = 0, inflation: float = 1.02) -> float:
    """max |x - y|^2 over X x Y.

    Exact chunked sweep when |X| |Y| <= exact_limit; otherwise the maximum
    over ``sample_pairs`` seeded random pairs, multiplied by ``inflation``.
    """
    A, B = as_array(X), as_array(Y)
    if A.shape[0] == 0 or B.shape[0] == 0:
        raise ValueError("empty point set")
    if A.shape[0] * B.shape[0] <= exact_limit:
        step = max(1, 10**6 // B.shape[0])
        return float(max(cdist(A[lo:lo + step], B, "sqeuclidean").max()
                         for lo in range(0, A.shape[0], step)))
    rng = np.random.default_rng(seed)
    i = rng.integers(A.shape[0], size=sample_pairs)
    j = rng.integers(B.shape[0], size=sample_pairs)
    D = A[i] - B[j]
    return inflation * float(np.einsum("ij,ij->i", D, D).max())


def derive_params(name: str, X, Y=None, sigma_frac: float = 1.0, **kw) -> KernelSpec:
    """Kernel with data-dependent parameters.

    gaussian: sigma = sigma_frac * radius(X); rational-quadratic: R = radius(X);
    bump-exp: c = 0.8 / max |x - y|^2. Parameter-free kernels pass through.
    """
    kdef = _lookup(name)
    if as_array(X).shape[0] == 0:
        raise ValueError("empty point set")
    if kdef.name == "gaussian":
        return KernelSpec("gaussian", {"sigma": sigma_frac * radius(X)})
    if kdef.name == "rational-quadratic":
        return KernelSpec("rational-quadratic", {"R": radius(X)})
    if kdef.name == "bump-exp":
        if Y is None:
            Y = X
        return KernelSpec("bump-exp", {"c": 0.8 / max_pairwise_sq_distance(X, Y, **kw)})
    return KernelSpec(kdef.name)


def parse_kernel(text: str, X=None, Y=None, sigma_frac: Optional[float] = None,
                 **params) -> KernelSpec:
    """Build a KernelSpec from a CLI/config string such as ``gaussian`` or
    ``table1:k4``. Missing parameters are derived from the data."""
    kdef = _lookup(text)
    given = {k: v for k, v in params.items() if v is not None}
    if set(kdef.params) <= set(given):
        return KernelSpec(kdef.name, {k: given[k] for k in kdef.params})
    if X is None:
        raise ValueError(f"kernel {text!r} needs parameters {kdef.params} or data to derive them")
    return derive_params(kdef.name, X, Y, sigma_frac=1.0 if sigma_frac is None else sigma_frac)
