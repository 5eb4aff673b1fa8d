"""Rank-K projections and truncated SVDs.

Small matrices go through LAPACK. Larger ones, and any matrix given only as a
pair of matrix-vector oracles, use a thick-restarted Golub-Kahan-Lanczos
bidiagonalisation with full reorthogonalisation.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass
from typing import Callable

import numpy as np

from .toeplitz import ToeplitzEmbedding

__all__ = [
    "DENSE_ENTRY_LIMIT",
    "PartialSVD",
    "PartialSVDError",
    "DegenerateSpectrumWarning",
    "partial_svd",
    "truncated_svd",
    "project_rank",
    "tls_nullvector",
]

DENSE_ENTRY_LIMIT = 4096
GAP_RTOL = 1e-12


class PartialSVDError(RuntimeError):
    """Raised when the iterative SVD exhausts its restart budget."""


class DegenerateSpectrumWarning(RuntimeWarning):
    """Two singular values that decide a projection coincide numerically."""


@dataclass
class PartialSVD:
    """Leading singular triplets ``X ~ U diag(s) V^H``."""

    left_vectors: np.ndarray
    singular_values: np.ndarray
    right_vectors: np.ndarray
    residual_estimate: float = 0.0
    degenerate: bool = False
    restarts: int = 0

    @property
    def rank(self) -> int:
        return self.singular_values.shape[0]

    def dense(self) -> np.ndarray:
        return (self.left_vectors * self.singular_values) @ self.right_vectors.conj().T


def _gap_is_degenerate(s_k: float, s_next: float, scale: float) -> bool:
    return scale > 0 and abs(s_k - s_next) <= GAP_RTOL * scale


def _rank_cut_is_ambiguous(s_k: float, s_next: float, scale: float) -> bool:
    # a tie at zero leaves the truncation unique
    return _gap_is_degenerate(s_k, s_next, scale) and s_k > GAP_RTOL * scale


def _orthonormalise_against(w, basis, rng):
    """Random unit vector orthogonal to the columns of ``basis``."""
    for _ in range(5):
        r = rng.standard_normal(w.shape[0]) + 1j * rng.standard_normal(w.shape[0])
        if basis.shape[1]:
            r -= basis @ (basis.conj().T @ r)
            r -= basis @ (basis.conj().T @ r)
        nrm = np.linalg.norm(r)
        if nrm > 1e-8:
            return r / nrm
    raise PartialSVDError("could not extend an orthonormal basis")


def partial_svd(
    matvec: Callable[[np.ndarray], np.ndarray],
    rmatvec: Callable[[np.ndarray], np.ndarray],
    shape: tuple[int, int],
    k: int,
    tol: float = 1e-10,
    *,
    oversample: int = 8,
    max_restarts: int | None = None,
    seed: int = 0,
) -> PartialSVD:
    """Top-``k`` singular triplets from matrix-vector oracles.

    Parameters
    ----------
    matvec, rmatvec
        Callables computing ``X @ u`` and ``X^H @ v``.
    shape
        ``(m, n)`` of the implicit matrix.
    k
        Number of triplets wanted, ``1 <= k <= min(m, n)``.
    tol
        A triplet is accepted when its residual is below ``tol * s_1``.
    oversample
        Extra Krylov dimensions kept beyond ``k``.
    max_restarts
        Defaults to ``10 * k`` (at least 10).
    seed
        Seeds the starting vector; results are deterministic for a fixed seed.

    Raises
    ------
    PartialSVDError
        If the residuals do not drop below ``tol`` within the restart budget.
    """
    m, n = shape
    if not 1 <= k <= min(m, n):
        raise ValueError(f"k={k} out of range for shape {shape}")
    rng = np.random.default_rng(seed)
    dim = min(k + oversample, min(m, n))
    keep = min(k + max(oversample // 2, 1), dim - 1) if dim > k else k
    if max_restarts is None:
        max_restarts = max(10 * k, 10)

    P = np.zeros((n, dim + 1), dtype=complex)
    Q = np.zeros((m, dim), dtype=complex)
    B = np.zeros((dim, dim), dtype=complex)
    p0 = rng.standard_normal(n) + 1j * rng.standard_normal(n)
    P[:, 0] = p0 / np.linalg.norm(p0)

    start = 0
    scale = 0.0
    for restart in range(max_restarts + 1):
        for j in range(start, dim):
            w = np.asarray(matvec(P[:, j]), dtype=complex)
            c = Q[:, :j].conj().T @ w
            w -= Q[:, :j] @ c
            c2 = Q[:, :j].conj().T @ w
            w -= Q[:, :j] @ c2
            c += c2
            alpha = np.linalg.norm(w)
            B[:j, j] = c
            scale = max(scale, alpha, np.max(np.abs(c), initial=0.0))
            if alpha <= 1e-14 * scale:
                B[j, j] = 0.0
                Q[:, j] = _orthonormalise_against(w, Q[:, :j], rng)
            else:
                B[j, j] = alpha
                Q[:, j] = w / alpha

            r = np.asarray(rmatvec(Q[:, j]), dtype=complex)
            r -= P[:, : j + 1] @ (P[:, : j + 1].conj().T @ r)
            r -= P[:, : j + 1] @ (P[:, : j + 1].conj().T @ r)
            beta = np.linalg.norm(r)
            scale = max(scale, beta)
            if j + 1 == n:
                beta = 0.0
            elif beta <= 1e-14 * scale:
                P[:, j + 1] = _orthonormalise_against(r, P[:, : j + 1], rng)
                beta = 0.0
            else:
                P[:, j + 1] = r / beta
            last_beta = beta

        U, s, Vh = np.linalg.svd(B)
        resid = last_beta * np.abs(U[dim - 1, :])
        s1 = s[0] if s[0] > 0 else 1.0
        if np.all(resid[:k] <= tol * s1) or restart == max_restarts:
            if not np.all(resid[:k] <= tol * s1):
                raise PartialSVDError(
                    f"partial SVD did not converge in {max_restarts} restarts "
                    f"(max residual {resid[:k].max() / s1:.2e})"
                )
            left = Q @ U[:, :k]
            right = P[:, :dim] @ Vh[:k].conj().T
            degenerate = dim > k and _rank_cut_is_ambiguous(s[k - 1], s[k], s[0])
            return PartialSVD(
                left, s[:k].copy(), right, float(resid[:k].max()), degenerate, restart
            )

        # thick restart on the leading Ritz vectors
        P[:, :keep] = P[:, :dim] @ Vh[:keep].conj().T
        P[:, keep] = P[:, dim]
        Q[:, :keep] = Q @ U[:, :keep]
        B[:] = 0.0
        B[np.arange(keep), np.arange(keep)] = s[:keep]
        start = keep
    raise AssertionError("unreachable")


def truncated_svd(X, K: int, *, tol: float = 1e-10, seed: int = 0) -> PartialSVD:
    """Leading ``K`` singular triplets of a dense matrix or Toeplitz embedding.

    Matrices with at most ``DENSE_ENTRY_LIMIT`` entries use a full LAPACK SVD.
    """
    if isinstance(X, ToeplitzEmbedding):
        shape, size = X.shape, X.size
    else:
        X = np.asarray(X)
        if X.ndim != 2:
            raise ValueError("expected a 2-D matrix")
        shape, size = X.shape, X.size
    if not 1 <= K <= min(shape):
        raise ValueError(f"rank K={K} out of range for shape {shape}")

    if size <= DENSE_ENTRY_LIMIT:
        D = X.dense() if isinstance(X, ToeplitzEmbedding) else X
        U, s, Vh = np.linalg.svd(D, full_matrices=False)
        degenerate = K < s.shape[0] and _rank_cut_is_ambiguous(s[K - 1], s[K], s[0])
        return PartialSVD(U[:, :K], s[:K], Vh[:K].conj().T, 0.0, degenerate)

    if isinstance(X, ToeplitzEmbedding):
        mv, rmv = X.matvec, X.rmatvec
    else:
        XH = X.conj().T
        mv, rmv = X.__matmul__, XH.__matmul__
    return partial_svd(mv, rmv, shape, K, tol, seed=seed)


def project_rank(X, K: int, *, tol: float = 1e-10, seed: int = 0) -> np.ndarray:
    """Frobenius-nearest matrix of rank at most ``K`` (truncated SVD).

    When the ``K``-th and ``(K+1)``-th singular values tie, the first ``K``
    triplets in decomposition order are kept and a
    :class:`DegenerateSpectrumWarning` is emitted.
    """
    svd = truncated_svd(X, K, tol=tol, seed=seed)
    if svd.degenerate:
        warnings.warn(
            "rank projection is not unique: sigma_K == sigma_{K+1}",
            DegenerateSpectrumWarning,
            stacklevel=2,
        )
    return svd.dense()


def tls_nullvector(E, *, warn: bool = False) -> np.ndarray:
    """Unit right singular vector for the smallest singular value of ``E``.

    This is the total-least-squares solution of ``E h = 0``. When the two
    smallest singular values coincide (relative to the largest) the nullspace
    is not one-dimensional; with ``warn=True`` this emits a
    :class:`DegenerateSpectrumWarning`.
    """
    D = E.dense() if isinstance(E, ToeplitzEmbedding) else np.asarray(E, dtype=complex)
    _, s, Vh = np.linalg.svd(D, full_matrices=True)
    v = Vh[-1].conj()
    if warn:
        ncols = D.shape[1]
        full = np.zeros(ncols)
        full[: s.shape[0]] = s
        if ncols > 1 and _gap_is_degenerate(full[-2], full[-1], full[0]):
            warnings.warn(
                "smallest singular value is not simple; nullspace vector is arbitrary",
                DegenerateSpectrumWarning,
                stacklevel=2,
            )
    return v
