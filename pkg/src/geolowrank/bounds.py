"""Brute-force evaluation of the a-priori error estimates.

Every estimate for the two-sided (CUR-type) and one-sided (ID-based)
approximations is computed term by term at desk scale and compared with the
true max-norm error of the corresponding factorization. The checks are
named after what they bound:

==========================  ==================================================
``bilinear-perturbation``   |a^T A b - a0^T A b0| <= |a0^T A| e2 + |A b0| e1 + |A| e1 e2
``entrywise``               |K - K~| per entry vs. min over (u, v) of the bracket
``max-norm``                ||K - K~||_max vs. max over (x, y) of the same
``column-projection``       ||K - K_XS K_XS^+ K||_max
``row-projection``          ||K - K K_SY^+ K_SY||_max
``geometric``               C1 d1 + C2 d2 + C3 d1 d2 with discrete Lipschitz C's
``one-sided``               ID form: first term + 2r * the same over the skeleton
``one-sided-geometric``     the one-sided estimate in terms of delta_{Y,S}
==========================  ==================================================

All norms of vectors are Euclidean; ||A|| of a matrix is the spectral norm.
The exhaustive max-min loops cost O(m n r1 r2), so every check refuses point
sets larger than ``size_guard`` (default 500).
"""
from __future__ import annotations

import json
import math
from dataclasses import asdict, dataclass, field
from typing import Callable, Optional, Sequence

import numpy as np
from scipy.spatial.distance import cdist

from .factor import one_sided, two_sided
from .kernels import DeskScaleError, KernelMatrixHandle
from .linalg import pinv_norm, spectral_norm
from .pointset import SubsetSelection, as_array, min_distances

__all__ = [
    "BoundReport",
    "BOUND_NAMES",
    "bilinear_perturbation",
    "discrete_lipschitz",
    "entrywise_bound",
    "max_norm_bound",
    "projection_bounds",
    "geometric_bound",
    "one_sided_bound",
    "one_sided_geometric_bound",
    "instance_bilinear_bound",
    "check_all",
    "delta_monotonicity_probe",
    "NonFiniteLipschitzError",
]

BOUND_NAMES = (
    "bilinear-perturbation",
    "entrywise",
    "max-norm",
    "column-projection",
    "row-projection",
    "geometric",
    "one-sided",
    "one-sided-geometric",
)

DEFAULT_SIZE_GUARD = 500
SLACK = 1e-9


class NonFiniteLipschitzError(ValueError):
    """Two coincident point pairs carry different kernel values."""


@dataclass
class BoundReport:
    """One evaluated estimate: true error ``lhs`` against the estimate ``rhs``.

    ``terms`` holds the named constituents (deltas, Lipschitz constants,
    pseudoinverse norm, ...). ``preconditions`` is False when the instance
    does not satisfy the hypotheses of the estimate (e.g. an ID that is not
    exact on the sampled block); ``holds`` is then not meaningful.
    """

    name: str
    lhs: float
    rhs: float
    terms: dict = field(default_factory=dict)
    preconditions: bool = True
    slack: float = SLACK

    @property
    def holds(self) -> bool:
        return bool(self.lhs <= self.rhs + self.slack * (1.0 + abs(self.rhs)))

    @property
    def tightness(self) -> float:
        """lhs / rhs (0 when both vanish)."""
        if self.rhs == 0:
            return 0.0 if self.lhs == 0 else math.inf
        return self.lhs / self.rhs

    def to_dict(self) -> dict:
        d = asdict(self)
        d["holds"] = self.holds
        d["terms"] = {k: _plain(v) for k, v in self.terms.items()}
        return d

    def to_json(self, **kw) -> str:
        return json.dumps(self.to_dict(), **kw)


def _plain(v):
    if isinstance(v, np.ndarray):
        return v.tolist()
    if isinstance(v, (np.floating, np.integer)):
        return v.item()
    return v


# --- bilinear perturbation estimate ------------------------------------------

def bilinear_perturbation(A, alpha, alpha_hat, beta, beta_hat) -> tuple[float, float]:
    """(|a^T A b - a0^T A b0|, ||a0^T A|| e2 + ||A b0|| e1 + ||A|| e1 e2).

    ``alpha``/``beta`` are the reference vectors, the hatted ones the
    perturbed ones; e1 = ||alpha_hat - alpha||, e2 = ||beta_hat - beta||.
    """
    A = np.atleast_2d(np.asarray(A, dtype=np.float64))
    a, ah, b, bh = (np.asarray(v, dtype=np.float64).ravel() for v in (alpha, alpha_hat, beta, beta_hat))
    m, n = A.shape
    if a.size != m or ah.size != m or b.size != n or bh.size != n:
        raise ValueError(f"shape mismatch: A is {m}x{n}, alpha {a.size}/{ah.size}, beta {b.size}/{bh.size}")
    e1 = np.linalg.norm(ah - a)
    e2 = np.linalg.norm(bh - b)
    lhs = abs(ah @ A @ bh - a @ A @ b)
    rhs = np.linalg.norm(a @ A) * e2 + np.linalg.norm(A @ b) * e1 + spectral_norm(A) * e1 * e2
    return float(lhs), float(rhs)


# --- discrete Lipschitz constants -----------------------------------------------

def _quotient_max(num: np.ndarray, den: np.ndarray) -> float:
    """max num/den; 0/0 is skipped, x/0 with x != 0 is +inf."""
    pos = den > 0
    best = float(np.max(num[pos] / den[pos], initial=0.0))
    if np.any((~pos) & (num != 0)):
        return math.inf
    return best


def _lip_joint(Kz: np.ndarray, Ks: np.ndarray, Dx: np.ndarray, Dy: np.ndarray) -> float:
    """max |Kz[x,y] - Ks[u,v]| / sqrt(Dx[x,u]^2 + Dy[y,v]^2)."""
    Dy2 = Dy ** 2
    best = 0.0
    for i in range(Kz.shape[0]):
        num = np.abs(Kz[i][:, None, None] - Ks[None, :, :])
        den = np.sqrt(Dx[i][None, :, None] ** 2 + Dy2[:, None, :])
        best = max(best, _quotient_max(num, den))
        if best == math.inf:
            break
    return best


def _lip_second(Kwz: np.ndarray, Kws: np.ndarray, Dy: np.ndarray) -> float:
    """max over x in W, y in Z, v in S of |K[x,y] - K[x,v]| / |y - v|."""
    best = 0.0
    for i in range(Kwz.shape[0]):
        best = max(best, _quotient_max(np.abs(Kwz[i][:, None] - Kws[i][None, :]), Dy))
        if best == math.inf:
            break
    return best


def discrete_lipschitz(kernel: Callable, variant: str = "joint", *, Z1=None, Z2=None,
                       S1=None, S2=None, W=None) -> float:
    """Smallest C with |k(x,y) - k(u,v)| <= C * (distance) over finite sets.

    ``variant``:
      ``"joint"``   pairs (x,y) in Z1 x Z2 against (u,v) in S1 x S2, distance
                    sqrt(|x-u|^2 + |y-v|^2);
      ``"second"``  x in W fixed, y in Z2 against v in S2, distance |y-v|;
      ``"first"``   y in W fixed, x in Z1 against u in S1, distance |x-u|.

    ``kernel`` is any callable mapping two (p, d), (q, d) arrays to a (p, q)
    matrix, e.g. a :class:`~geolowrank.kernels.KernelSpec`. Returns +inf
    when coincident pairs carry different values.
    """
    if variant == "joint":
        Z1, Z2, S1, S2 = (as_array(a) for a in (Z1, Z2, S1, S2))
        return _lip_joint(np.asarray(kernel(Z1, Z2)), np.asarray(kernel(S1, S2)),
                          cdist(Z1, S1), cdist(Z2, S2))
    if variant == "second":
        W, Z2, S2 = (as_array(a) for a in (W, Z2, S2))
        return _lip_second(np.asarray(kernel(W, Z2)), np.asarray(kernel(W, S2)), cdist(Z2, S2))
    if variant == "first":
        Z1, S1, W = (as_array(a) for a in (Z1, S1, W))
        # transpose so that the fixed point indexes the rows
        return _lip_second(np.asarray(kernel(Z1, W)).T, np.asarray(kernel(S1, W)).T, cdist(Z1, S1))
    raise ValueError("variant must be 'joint', 'first' or 'second'")


def _finite(name: str, value: float) -> float:
    if not math.isfinite(value):
        raise NonFiniteLipschitzError(
            f"discrete Lipschitz constant {name} is infinite: coincident points with different kernel values")
    return value


# --- instance setup -------------------------------------------------------------

def _indices(S, ps) -> np.ndarray:
    if isinstance(S, SubsetSelection):
        return S.indices
    return SubsetSelection(ps, S).indices


def _dense(h: KernelMatrixHandle, size_guard: int) -> np.ndarray:
    m, n = h.shape
    if max(m, n) > size_guard:
        raise DeskScaleError(f"bound checks are limited to sets of at most {size_guard} points, got {m}x{n}")
    return h.dense()


def _two_sided_pieces(K, i1, i2):
    Kss = K[np.ix_(i1, i2)]
    e1 = cdist(K[:, i2], Kss)          # ||K_{x S2} - K_{u S2}||, m x r1
    e2 = cdist(K[i1].T, Kss.T)         # ||K_{S1 y} - K_{S1 v}||, n x r2
    return Kss, e1, e2


def _entrywise_rhs(K, Kss, e1, e2, p) -> np.ndarray:
    """B[x, y] = min over (u, v) of |k(x,y) - k(u,v)| + e1 + e2 + p e1 e2, the
    joint minimum of the whole bracket."""
    B = np.empty_like(K)
    for i in range(K.shape[0]):
        t = (np.abs(K[i][:, None, None] - Kss[None, :, :])
             + e1[i][None, :, None] + e2[:, None, :]
             + p * e1[i][None, :, None] * e2[:, None, :])
        B[i] = t.min(axis=(1, 2))
    return B


def _column_capture(K, rows, i2) -> float:
    """max over x in rows, y of min over v in S of |k(x,y) - k(x,v)| + ||K_{Xy} - K_{Xv}||."""
    Dcol = cdist(K.T, K[:, i2].T)      # n x r
    best = 0.0
    for i in rows:
        t = np.abs(K[i][:, None] - K[i, i2][None, :]) + Dcol
        best = max(best, float(t.min(axis=1).max()))
    return best


def _row_capture(K, i1) -> float:
    return _column_capture(K.T, range(K.shape[1]), i1)


# --- two-sided checks -----------------------------------------------------------

def _two_sided_setup(h, S1, S2, size_guard):
    K = _dense(h, size_guard)
    i1, i2 = _indices(S1, h.X), _indices(S2, h.Y)
    f = two_sided(h, i1, i2, stabilize=False)
    E = np.abs(K - f.dense())
    Kss, e1, e2 = _two_sided_pieces(K, i1, i2)
    p = pinv_norm(Kss)
    return K, i1, i2, E, Kss, e1, e2, p


def entrywise_bound(h: KernelMatrixHandle, S1, S2, size_guard: int = DEFAULT_SIZE_GUARD) -> BoundReport:
    """Per-entry check of the two-sided error; reports the tightest entry
    (largest |E| - B) and whether every entry satisfies its own bound."""
    K, i1, i2, E, Kss, e1, e2, p = _two_sided_setup(h, S1, S2, size_guard)
    B = _entrywise_rhs(K, Kss, e1, e2, p)
    excess = E - B - SLACK * (1.0 + np.abs(B))
    x, y = np.unravel_index(int(np.argmax(excess)), E.shape)
    return BoundReport("entrywise", float(E[x, y]), float(B[x, y]),
                       {"entry": [int(x), int(y)], "all_entries_hold": bool((excess <= 0).all()),
                        "pinv_norm": p, "r1": int(i1.size), "r2": int(i2.size)})


def max_norm_bound(h: KernelMatrixHandle, S1, S2, size_guard: int = DEFAULT_SIZE_GUARD) -> BoundReport:
    K, i1, i2, E, Kss, e1, e2, p = _two_sided_setup(h, S1, S2, size_guard)
    B = _entrywise_rhs(K, Kss, e1, e2, p)
    return BoundReport("max-norm", float(E.max()), float(B.max()),
                       {"pinv_norm": p, "r1": int(i1.size), "r2": int(i2.size)})


def projection_bounds(h: KernelMatrixHandle, S1, S2,
                      size_guard: int = DEFAULT_SIZE_GUARD) -> list[BoundReport]:
    """Error of projecting K onto the span of K_{X S2} (columns) and of
    K_{S1 Y} (rows)."""
    K = _dense(h, size_guard)
    i1, i2 = _indices(S1, h.X), _indices(S2, h.Y)
    out = []
    for name, block, capture in (
        ("column-projection", K[:, i2], lambda: _column_capture(K, range(K.shape[0]), i2)),
        ("row-projection", K[i1].T, lambda: _row_capture(K, i1)),
    ):
        U, sig, _ = np.linalg.svd(block, full_matrices=False)
        k = int(np.count_nonzero(sig > max(block.shape) * np.finfo(float).eps * sig[0])) if sig[0] > 0 else 0
        Uk = U[:, :k]
        if name == "column-projection":
            lhs = np.abs(K - Uk @ (Uk.T @ K)).max()
        else:
            lhs = np.abs(K - (K @ Uk) @ Uk.T).max()
        out.append(BoundReport(name, float(lhs), capture(), {"r": int(block.shape[1])}))
    return out


def geometric_bound(h: KernelMatrixHandle, S1, S2, size_guard: int = DEFAULT_SIZE_GUARD) -> BoundReport:
    """C1 d1 + C2 d2 + C3 d1 d2 with

    C1 = L(X x Y, S1 x S2) + sqrt(r2) L(X, S1)_{S2}
    C2 = L(X x Y, S1 x S2) + sqrt(r1) L(Y, S2)_{S1}
    C3 = ||K_{S1 S2}^+|| sqrt(r1 r2) L(X, S1)_{S2} L(Y, S2)_{S1}
    d1 = delta(X, S1), d2 = delta(Y, S2).
    """
    K, i1, i2, E, Kss, e1, e2, p = _two_sided_setup(h, S1, S2, size_guard)
    X, Y = h.X.points, h.Y.points
    Dx, Dy = cdist(X, X[i1]), cdist(Y, Y[i2])
    L = _finite("L(XxY, S1xS2)", _lip_joint(K, Kss, Dx, Dy))
    Lx = _finite("L(X,S1)_S2", _lip_second(K[:, i2].T, K[np.ix_(i1, i2)].T, Dx))
    Ly = _finite("L(Y,S2)_S1", _lip_second(K[i1], Kss, Dy))
    r1, r2 = i1.size, i2.size
    d1, d2 = float(Dx.min(axis=1).max()), float(Dy.min(axis=1).max())
    C1 = L + math.sqrt(r2) * Lx
    C2 = L + math.sqrt(r1) * Ly
    C3 = p * math.sqrt(r1 * r2) * Lx * Ly
    rhs = C1 * d1 + C2 * d2 + C3 * d1 * d2
    return BoundReport("geometric", float(E.max()), float(rhs),
                       {"L_joint": L, "L_x": Lx, "L_y": Ly, "C1": C1, "C2": C2, "C3": C3,
                        "delta_X_S1": d1, "delta_Y_S2": d2, "pinv_norm": p,
                        "r1": int(r1), "r2": int(r2)})


def instance_bilinear_bound(h: KernelMatrixHandle, S1, S2,
                            size_guard: int = DEFAULT_SIZE_GUARD) -> BoundReport:
    """The bilinear perturbation estimate on the worst entry of a two-sided approximation:
    A = K_{S1 S2}^+, a0 = K_{u S2}, a = K_{x S2}, b0 = K_{S1 v}, b = K_{S1 y}
    with (x, y) the largest error and (u, v) the nearest subset points."""
    K, i1, i2, E, Kss, e1, e2, p = _two_sided_setup(h, S1, S2, size_guard)
    x, y = np.unravel_index(int(np.argmax(E)), E.shape)
    u = i1[int(np.argmin(cdist(h.X.points[x:x + 1], h.X.points[i1])))]
    v = i2[int(np.argmin(cdist(h.Y.points[y:y + 1], h.Y.points[i2])))]
    A = np.linalg.pinv(Kss, rcond=max(Kss.shape) * np.finfo(float).eps)
    lhs, rhs = bilinear_perturbation(A, K[u, i2], K[x, i2], K[i1, v], K[i1, y])
    return BoundReport("bilinear-perturbation", lhs, rhs,
                       {"x": int(x), "y": int(y), "u": int(u), "v": int(v)})


# --- one-sided checks -----------------------------------------------------------

def _one_sided_setup(h, S, size_guard):
    K = _dense(h, size_guard)
    iS = _indices(S, h.Y)
    # the estimate assumes an exact ID of K_{XS}, i.e. rank = card(S)
    f = one_sided(h, iS.size, oversample=1.0, selector=iS)
    skel = np.asarray(f.provenance["skeleton_rows"], dtype=np.intp)
    U = f.left
    C = K[:, iS]
    id_residual = float(np.abs(C - U @ C[skel]).max())
    G_max = float(f.flags["max_coeff"])
    exact = id_residual <= 1e-10 * max(1.0, float(np.abs(C).max())) and G_max <= 2.0
    E = np.abs(K - f.dense())
    return K, iS, skel, E, exact, {"id_residual": id_residual, "G_max": G_max}


def one_sided_bound(h: KernelMatrixHandle, S, size_guard: int = DEFAULT_SIZE_GUARD) -> BoundReport:
    """||K - U K_{IY}||_max <= T(X) + 2r T(I), where
    T(Z) = max over x in Z, y in Y of min over v in S of
           |k(x,y) - k(x,v)| + ||K_{Xy} - K_{Xv}||  and r = card(I)."""
    K, iS, skel, E, exact, info = _one_sided_setup(h, S, size_guard)
    t_all = _column_capture(K, range(K.shape[0]), iS)
    t_skel = _column_capture(K, skel, iS)
    r = skel.size
    return BoundReport("one-sided", float(E.max()), t_all + 2 * r * t_skel,
                       {"first_term": t_all, "skeleton_term": t_skel, "r": int(r), **info},
                       preconditions=exact)


def one_sided_geometric_bound(h: KernelMatrixHandle, S,
                              size_guard: int = DEFAULT_SIZE_GUARD) -> BoundReport:
    """L(X x Y, X x S) d + (1 + 2r) sqrt(m) L(Y, S)_X d + 2r L(I x Y, I x S) d
    with d = delta(Y, S)."""
    K, iS, skel, E, exact, info = _one_sided_setup(h, S, size_guard)
    X, Y = h.X.points, h.Y.points
    m = X.shape[0]
    Dy = cdist(Y, Y[iS])
    d = float(Dy.min(axis=1).max())
    KS = K[:, iS]
    L_all = _finite("L(XxY, XxS)", _lip_joint(K, KS, cdist(X, X), Dy))
    Ly = _finite("L(Y,S)_X", _lip_second(K, KS, Dy))
    L_skel = _finite("L(IxY, IxS)", _lip_joint(K[skel], KS[skel], cdist(X[skel], X[skel]), Dy))
    r = skel.size
    rhs = L_all * d + (1 + 2 * r) * math.sqrt(m) * Ly * d + 2 * r * L_skel * d
    return BoundReport("one-sided-geometric", float(E.max()), float(rhs),
                       {"L_joint": L_all, "L_y": Ly, "L_joint_skeleton": L_skel,
                        "delta_Y_S": d, "r": int(r), "m": int(m), **info},
                       preconditions=exact)


# --- drivers --------------------------------------------------------------------

def check_all(h: KernelMatrixHandle, S1, S2, S=None,
              size_guard: int = DEFAULT_SIZE_GUARD) -> list[BoundReport]:
    """Every estimate on one instance. ``S`` (subset of Y for the one-sided
    checks) defaults to ``S2``."""
    S = S2 if S is None else S
    reports = [instance_bilinear_bound(h, S1, S2, size_guard),
               entrywise_bound(h, S1, S2, size_guard),
               max_norm_bound(h, S1, S2, size_guard),
               *projection_bounds(h, S1, S2, size_guard),
               geometric_bound(h, S1, S2, size_guard),
               one_sided_bound(h, S, size_guard),
               one_sided_geometric_bound(h, S, size_guard)]
    return reports


def delta_monotonicity_probe(h: KernelMatrixHandle, S1, S2, extra: Sequence[int],
                             size_guard: int = DEFAULT_SIZE_GUARD) -> dict:
    """Enlarge S1 by ``extra`` rows and recompute delta(X, S1) and the
    geometric estimate. delta can only shrink; the estimate is merely
    recorded, since its constants change with the subset."""
    i1 = _indices(S1, h.X)
    bigger = np.union1d(i1, np.asarray(extra, dtype=np.intp))
    before = geometric_bound(h, i1, S2, size_guard)
    after = geometric_bound(h, bigger, S2, size_guard)
    return {"delta_before": float(min_distances(h.X, h.X.points[i1]).max()),
            "delta_after": float(min_distances(h.X, h.X.points[bigger]).max()),
            "rhs_before": before.rhs, "rhs_after": after.rhs}
