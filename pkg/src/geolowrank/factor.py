"""Low-rank factorizations of kernel matrices.

two_sided   K ~= K_{X S2} K_{S1 S2}^+ K_{S1 Y}
one_sided   K ~= U K_{I Y},  U = P [I; G] from an ID of K_{X S2}
symmetric   K ~= U K_{I I} U^T  (X = Y, symmetric kernel)
aca         partially pivoted adaptive cross approximation

Every method only evaluates the kernel blocks it needs. All of them return
a :class:`LowRankFactorization` with K ~= left @ right.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional

import numpy as np
import scipy.linalg as la

from .kernels import DENSE_GUARD, DeskScaleError, KernelMatrixHandle
from .linalg import interpolative_decomposition, spectral_norm, truncated_pinv
from .pointset import SubsetSelection
from .selectors import SelectorConfig, select

__all__ = [
    "LowRankFactorization",
    "two_sided",
    "one_sided",
    "symmetric",
    "aca",
    "evaluate_error",
    "estimate_rel2",
    "METHODS",
]

METHODS = ("two-sided", "one-sided", "symmetric", "aca")


@dataclass
class LowRankFactorization:
    left: np.ndarray
    right: np.ndarray
    method: str
    provenance: dict = field(default_factory=dict)
    stabilization: Optional[dict] = None
    symmetric: bool = False
    flags: dict = field(default_factory=dict)
    middle: Optional[np.ndarray] = None

    @property
    def rank(self) -> int:
        return self.left.shape[1]

    @property
    def shape(self) -> tuple[int, int]:
        return self.left.shape[0], self.right.shape[1]

    def matvec(self, v):
        return self.left @ (self.right @ v)

    def rmatvec(self, v):
        return self.right.T @ (self.left.T @ v)

    def dense(self) -> np.ndarray:
        A = self.left @ self.right
        if self.symmetric:
            # U K_II U^T is symmetric in exact arithmetic; drop the rounding asymmetry
            A = 0.5 * (A + A.T)
        return A


def _as_selection(S, ps) -> SubsetSelection:
    if isinstance(S, SubsetSelection):
        return S
    return SubsetSelection(ps, S)


def two_sided(h: KernelMatrixHandle, S1, S2, stabilize: Optional[bool] = None,
              eps: float = 1e-10) -> LowRankFactorization:
    """K_{X S2} K_{S1 S2}^+ K_{S1 Y}.

    With ``stabilize`` the pseudoinverse is replaced by R_eps^+ Q^T from a
    QR factorization of K_{S1 S2} whose singular values below
    ``eps * sigma_max`` are dropped; the factors are then
    (K_{X S2} R_eps^+, Q^T K_{S1 Y}). The default (None) turns it on only
    when either subset was drawn uniformly at random.
    """
    S1 = _as_selection(S1, h.X)
    S2 = _as_selection(S2, h.Y)
    if len(S1) == 0 or len(S2) == 0:
        raise ValueError("subsets must be nonempty")
    if stabilize is None:
        stabilize = "uniform" in (S1.method, S2.method)
    C = h.block(None, S2.indices)
    W = h.block(S1.indices, S2.indices)
    Rw = h.block(S1.indices, None)
    prov = {"S1": S1.indices.tolist(), "S2": S2.indices.tolist()}
    if stabilize:
        tp = truncated_pinv(W, eps)
        return LowRankFactorization(C @ tp.left, tp.right @ Rw, "two-sided", prov,
                                    stabilization={"eps": eps, "effective_rank": tp.rank})
    U, sig, Vt = la.svd(W, full_matrices=False)
    cutoff = max(W.shape) * np.finfo(float).eps * (sig[0] if sig.size else 0.0)
    k = int(np.count_nonzero(sig > cutoff))
    # K^+ = V_k S_k^-1 U_k^T, split so that the inner dimension is the rank
    left = C @ (Vt[:k].T / sig[:k])
    return LowRankFactorization(left, U[:, :k].T @ Rw, "two-sided", prov)


def _sample(ps, count, selector):
    if isinstance(selector, SubsetSelection):
        return selector
    if isinstance(selector, (list, tuple, np.ndarray)):
        return SubsetSelection(ps, selector)
    return select(ps, count, selector or SelectorConfig())


def one_sided(h: KernelMatrixHandle, r: int, oversample: float = 2.0,
              selector=None, side: str = "sample-y", s: float = 2.0) -> LowRankFactorization:
    """Sample S2 from Y, ID K_{X S2} at rank r, return U and K_{I Y}.

    ``side="sample-x"`` runs the same procedure on K^T: X is sampled, the
    ID picks skeleton columns J of Y, and K ~= K_{X J} V^T.
    ``selector`` is a SelectorConfig, a precomputed SubsetSelection or an
    index list. Sample size is min(ceil(oversample * r), n).
    """
    if side not in ("sample-y", "sample-x"):
        raise ValueError("side must be 'sample-y' or 'sample-x'")
    if r < 1:
        raise ValueError("rank must be at least 1")
    if side == "sample-x":
        f = one_sided(h.transpose(), r, oversample, selector, "sample-y", s)
        return LowRankFactorization(f.right.T, f.left.T, "one-sided",
                                    {"S1": f.provenance["S2"], "skeleton_cols": f.provenance["skeleton_rows"]},
                                    flags=f.flags)
    m, n = h.shape
    count = min(int(np.ceil(oversample * r)), n)
    S2 = _sample(h.Y, count, selector)
    if r > len(S2) or r > m:
        raise ValueError(f"rank {r} exceeds the sample size {len(S2)} or the row count {m}")
    C = h.block(None, S2.indices)
    idd = interpolative_decomposition(C, r, s)
    U = idd.interpolation_matrix()
    V = h.block(idd.skeleton, None)
    prov = {"S2": S2.indices.tolist(), "skeleton_rows": idd.skeleton.tolist()}
    return LowRankFactorization(U, V, "one-sided", prov,
                                flags={"max_coeff": idd.max_coeff, "numerical_rank": idd.numerical_rank})


def symmetric(h: KernelMatrixHandle, r: int, oversample: float = 2.0, selector=None,
              s: float = 2.0) -> LowRankFactorization:
    """U K_{I I} U^T for a symmetric kernel on a single point set."""
    if not h.kernel.symmetric:
        raise ValueError(f"kernel {h.kernel.name} is not symmetric")
    if not h.same_points:
        raise ValueError("the symmetric factorization needs X = Y")
    n = h.shape[0]
    count = min(int(np.ceil(oversample * r)), n)
    S = _sample(h.X, count, selector)
    if r > len(S):
        raise ValueError(f"rank {r} exceeds the sample size {len(S)}")
    idd = interpolative_decomposition(h.block(None, S.indices), r, s)
    U = idd.interpolation_matrix()
    Kii = h.block(idd.skeleton, idd.skeleton)
    prov = {"S": S.indices.tolist(), "skeleton_rows": idd.skeleton.tolist()}
    return LowRankFactorization(U, Kii @ U.T, "symmetric", prov, symmetric=True,
                                flags={"max_coeff": idd.max_coeff}, middle=Kii)


def aca(h: KernelMatrixHandle, r: int, start_row: Optional[int] = None,
        pivot_tol: float = 1e-14) -> LowRankFactorization:
    """Adaptive cross approximation with partial pivoting, fixed rank.

    Step k evaluates one kernel row and one kernel column, subtracts the
    current rank-(k-1) cross, and picks the next column pivot as the
    largest residual entry in the row and the next row pivot as the largest
    residual entry in that column (among unused rows/columns). Stops early,
    with ``flags["early_stop"]``, once a pivot falls below
    ``pivot_tol`` times the first pivot. The default start row is the
    point of X farthest from the centroid of Y.
    """
    if r < 1:
        raise ValueError("rank must be at least 1")
    m, n = h.shape
    r = min(r, m, n)
    if start_row is None:
        c = h.Y.points.mean(axis=0)
        start_row = int(np.argmax(np.einsum("ij,ij->i", h.X.points - c, h.X.points - c)))
    U = np.zeros((m, r))
    V = np.zeros((r, n))
    used_rows = np.zeros(m, dtype=bool)
    used_cols = np.zeros(n, dtype=bool)
    rows, cols = [], []
    i = start_row
    first = None
    k = 0
    flags = {"early_stop": False}
    while k < r:
        used_rows[i] = True
        row = h.row(i) - U[i, :k] @ V[:k]
        cand = np.where(used_cols, -1.0, np.abs(row))
        j = int(np.argmax(cand))
        piv = row[j]
        if first is None:
            first = abs(piv)
        if abs(piv) <= pivot_tol * first or first == 0.0:
            flags["early_stop"] = True
            break
        used_cols[j] = True
        V[k] = row / piv
        U[:, k] = h.col(j) - U[:, :k] @ V[:k, j]
        rows.append(i)
        cols.append(j)
        k += 1
        if k < r:
            cand = np.where(used_rows, -1.0, np.abs(U[:, k - 1]))
            i = int(np.argmax(cand))
            if cand[i] < 0:
                break
    flags["achieved_rank"] = k
    return LowRankFactorization(U[:, :k], V[:k], "aca", {"rows": rows, "cols": cols}, flags=flags)


def evaluate_error(f: LowRankFactorization, h: KernelMatrixHandle, norm: str = "rel2",
                   guard: int = DENSE_GUARD, K: Optional[np.ndarray] = None,
                   K_norm: Optional[float] = None) -> float:
    """Exact error of ``f`` against the dense kernel matrix.

    ``norm="rel2"``: ||K - K~||_2 / ||K||_2; ``norm="max"``: max |K - K~|.
    Pass ``K`` (and ``K_norm`` = ||K||_2) to reuse already computed values.
    """
    m, n = h.shape
    if m * n > guard:
        raise DeskScaleError(f"dense error evaluation of a {m}x{n} matrix exceeds the size guard {guard}")
    if K is None:
        K = h.dense(guard)
    E = K - (f.dense() if f.rank else 0.0)
    if norm == "max":
        return float(np.abs(E).max())
    if norm != "rel2":
        raise ValueError("norm must be 'rel2' or 'max'")
    top = spectral_norm(K, guard) if K_norm is None else K_norm
    return float(spectral_norm(E, guard) / top) if top > 0 else 0.0


def estimate_rel2(f: LowRankFactorization, h: KernelMatrixHandle, iters: int = 40,
                  seed: int = 0, chunk: int = 2048) -> float:
    """Power-iteration estimate of ||K - K~||_2 / ||K||_2 without forming K.

    Kernel products are computed by row chunks; memory stays O((m + n) r).
    The estimate is a lower bound that converges to the true ratio.
    """
    rng = np.random.default_rng(seed)

    def norm_est(mv, rmv, n):
        v = rng.standard_normal(n)
        v /= np.linalg.norm(v)
        est = 0.0
        for _ in range(iters):
            w = rmv(mv(v))
            nw = np.linalg.norm(w)
            if nw == 0:
                return 0.0
            est = np.sqrt(nw)
            v = w / nw
        return float(est)

    n = h.shape[1]
    top = norm_est(lambda v: h.matvec(v, chunk), lambda u: h.rmatvec(u, chunk), n)
    err = norm_est(lambda v: h.matvec(v, chunk) - f.matvec(v),
                   lambda u: h.rmatvec(u, chunk) - f.rmatvec(u), n)
    return err / top if top > 0 else 0.0
