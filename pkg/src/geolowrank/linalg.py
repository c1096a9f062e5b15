"""Dense linear algebra at desk scale.

Column-pivoted QR and SVD come from LAPACK through scipy. On top of them:
an interpolative decomposition whose coefficients are bounded entrywise by
``s`` (pivoted QR followed by determinant-increasing swaps), a truncated
QR-based pseudoinverse, and Eckart-Young error floors.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.linalg as la

from .kernels import DENSE_GUARD, DeskScaleError

__all__ = [
    "InterpolativeDecomposition",
    "TruncatedPinv",
    "qr_column_pivoted",
    "interpolative_decomposition",
    "truncated_pinv",
    "svd_dense",
    "singular_values",
    "spectral_norm",
    "best_rank_r_error",
    "pinv_norm",
]

#: relative threshold on |R_ii| below which pivoted-QR columns count as zero.
RANK_TOL = 1e-13


@dataclass(frozen=True)
class InterpolativeDecomposition:
    """Row ID  M ~= P [I; G] M[skeleton].

    ``skeleton`` are the k retained row indices, ``redundant`` the others in
    the order matching the rows of ``coeffs`` (= G, shape (m - k, k)).
    ``perm`` = skeleton followed by redundant, i.e. the row order of P^T M.
    ``numerical_rank`` <= k counts the skeleton rows that carry information;
    any remaining skeleton rows were padded in with zero coefficients.
    """

    skeleton: np.ndarray
    redundant: np.ndarray
    coeffs: np.ndarray
    bound: float
    numerical_rank: int
    swaps: int = 0

    @property
    def rank(self) -> int:
        return self.skeleton.size

    @property
    def perm(self) -> np.ndarray:
        return np.concatenate([self.skeleton, self.redundant])

    @property
    def max_coeff(self) -> float:
        return float(np.abs(self.coeffs).max(initial=0.0))

    def interpolation_matrix(self) -> np.ndarray:
        """U = P [I; G] of shape (m, k)."""
        m = self.skeleton.size + self.redundant.size
        U = np.zeros((m, self.rank))
        U[self.skeleton, np.arange(self.rank)] = 1.0
        U[self.redundant] = self.coeffs
        return U

    def reconstruct(self, skeleton_rows: np.ndarray) -> np.ndarray:
        return self.interpolation_matrix() @ skeleton_rows


@dataclass(frozen=True)
class TruncatedPinv:
    """Stabilised pseudoinverse of M = Q R with R's small singular values cut.

    ``r_pinv`` is R_eps^+; the operator R_eps^+ Q^T approximates M^+. In
    factored form R_eps^+ Q^T = left @ right with inner dimension ``rank``.
    """

    q: np.ndarray
    r_pinv: np.ndarray
    eps: float
    rank: int
    left: np.ndarray
    right: np.ndarray

    def operator(self) -> np.ndarray:
        return self.r_pinv @ self.q.T


def qr_column_pivoted(M):
    """M[:, perm] = Q R with |diag R| nonincreasing."""
    M = np.asarray(M, dtype=np.float64)
    if M.size == 0:
        raise ValueError("empty matrix")
    Q, R, perm = la.qr(M, mode="economic", pivoting=True)
    return Q, R, perm


def _coefficients(M: np.ndarray, skel: np.ndarray, rest: np.ndarray) -> np.ndarray:
    """G with M[rest] ~= G M[skel] in the least-squares sense (skel rows independent)."""
    if rest.size == 0:
        return np.zeros((0, skel.size))
    Q, R = la.qr(M[skel].T, mode="economic")
    return la.solve_triangular(R, Q.T @ M[rest].T).T


def interpolative_decomposition(M, k: int, s: float = 2.0, rank_tol: float = RANK_TOL,
                                max_swaps: int | None = None) -> InterpolativeDecomposition:
    """Rank-k row interpolative decomposition with ``max |G| <= s``.

    Column-pivoted QR of M^T picks an initial skeleton. While some
    coefficient exceeds ``s`` in magnitude, the largest offender is swapped
    into the skeleton; each swap multiplies |det| of the skeleton block by
    that coefficient (> s > 1), so the loop terminates. The coefficients are
    recomputed from the final skeleton, so the bound is checked on exactly
    the G that is returned.

    If M has numerical rank k0 < k (relative tolerance ``rank_tol`` on the
    pivoted-QR diagonal), only k0 rows are selected by the procedure and the
    skeleton is padded with the next pivot rows, which get zero
    coefficients.
    """
    M = np.asarray(M, dtype=np.float64)
    if M.ndim != 2:
        raise ValueError("M must be a matrix")
    m, c = M.shape
    if not 1 <= k <= min(m, c):
        raise ValueError(f"rank k={k} must satisfy 1 <= k <= min{M.shape}")
    if not s > 1.0:
        raise ValueError("the coefficient bound s must exceed 1")

    _, R, piv = la.qr(M.T, mode="economic", pivoting=True)
    diag = np.abs(np.diag(R))
    k0 = int(np.count_nonzero(diag > rank_tol * diag[0])) if diag[0] > 0 else 0
    k0 = min(k0, k)

    skel = piv[:k0].copy()
    rest = piv[k0:].copy()
    G = _coefficients(M, skel, rest) if k0 else np.zeros((m, 0))
    swaps = 0
    limit = max_swaps if max_swaps is not None else 100 * m
    while G.size:
        flat = int(np.argmax(np.abs(G)))
        i, j = divmod(flat, G.shape[1])
        if abs(G[i, j]) <= s:
            break
        if swaps >= limit:
            raise RuntimeError(f"ID swap loop did not converge in {limit} swaps")
        skel[j], rest[i] = rest[i], skel[j]
        swaps += 1
        G = _coefficients(M, skel, rest)

    if k0 < k:
        pad = rest[: k - k0]
        rest = rest[k - k0:]
        skel = np.concatenate([skel, pad])
        G = np.hstack([G[k - k0:], np.zeros((rest.size, k - k0))])
    return InterpolativeDecomposition(skeleton=skel, redundant=rest, coeffs=G,
                                      bound=s, numerical_rank=k0, swaps=swaps)


def truncated_pinv(M, eps: float = 1e-10) -> TruncatedPinv:
    """QR-factor M and invert R on singular values >= eps * sigma_max."""
    if eps < 0:
        raise ValueError("eps must be nonnegative")
    M = np.asarray(M, dtype=np.float64)
    Q, R = la.qr(M, mode="economic")
    U, sig, Vt = la.svd(R, full_matrices=False)
    top = sig[0] if sig.size else 0.0
    keep = (sig > 0) & (sig >= eps * top) if top > 0 else np.zeros(sig.shape, dtype=bool)
    k = int(np.count_nonzero(keep))
    left = Vt[:k].T / sig[:k]
    r_pinv = left @ U[:, :k].T
    right = U[:, :k].T @ Q.T
    return TruncatedPinv(q=Q, r_pinv=r_pinv, eps=eps, rank=k, left=left, right=right)


def _guard(M, guard):
    if M.shape[0] * M.shape[1] > guard:
        raise DeskScaleError(
            f"dense SVD of a {M.shape[0]}x{M.shape[1]} matrix exceeds the size guard {guard}; "
            "use a sampled/randomized estimate instead")


def svd_dense(M, guard: int = DENSE_GUARD):
    M = np.asarray(M, dtype=np.float64)
    _guard(M, guard)
    return la.svd(M, full_matrices=False)


def singular_values(M, guard: int = DENSE_GUARD) -> np.ndarray:
    M = np.asarray(M, dtype=np.float64)
    _guard(M, guard)
    try:
        return la.svdvals(M)
    except la.LinAlgError:
        return la.svd(M, compute_uv=False, lapack_driver="gesvd")


#: below this smaller dimension the spectral norm comes from a full SVD.
GRAM_MIN_DIM = 200


def spectral_norm(M, guard: int = DENSE_GUARD) -> float:
    """||M||_2.

    Large matrices use the largest eigenvalue of the smaller Gram matrix
    (one GEMM plus a partial symmetric eigensolve), several times faster
    than a full SVD and accurate to working precision relative to ||M||_2.
    """
    M = np.asarray(M, dtype=np.float64)
    _guard(M, guard)
    k = min(M.shape)
    if k == 0:
        return 0.0
    if k < GRAM_MIN_DIM:
        return float(singular_values(M, guard)[0])
    G = M @ M.T if M.shape[0] == k else M.T @ M
    top = la.eigvalsh(G, subset_by_index=[k - 1, k - 1])[0]
    return float(np.sqrt(max(top, 0.0)))


def best_rank_r_error(M, r: int, guard: int = DENSE_GUARD) -> float:
    """sigma_{r+1} / sigma_1, the optimal relative 2-norm error at rank r."""
    sv = singular_values(M, guard)
    if sv.size == 0 or sv[0] == 0:
        return 0.0
    return float(sv[r] / sv[0]) if r < sv.size else 0.0


def pinv_norm(M) -> float:
    """||M^+||_2 = 1 / smallest nonzero singular value.

    Nonzero means above the cutoff ``max(shape) * eps * sigma_max`` that
    ``scipy.linalg.pinv`` applies, so this is the norm of the same
    pseudoinverse the factorizations use.
    """
    sv = la.svdvals(np.asarray(M, dtype=np.float64))
    if sv.size == 0 or sv[0] == 0:
        return 0.0
    cutoff = max(np.shape(M)) * np.finfo(float).eps * sv[0]
    return float(1.0 / sv[sv > cutoff][-1])
