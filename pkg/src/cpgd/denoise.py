"""Cadzow denoising and the inexact proximal step of CPGD.

Both operate on generators: every pass of the alternating projections ends on
the Toeplitz subspace, so the iterate is carried as its generator and the
Toeplitz/rank/ball projections are applied without building dense matrices
unless the embedding is small.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass

import numpy as np

from .lowrank import (
    DENSE_ENTRY_LIMIT,
    PartialSVD,
    PartialSVDError,
    truncated_svd,
)
from .toeplitz import (
    ToeplitzEmbedding,
    _gamma,
    half_bandwidth,
    lowrank_adjoint,
    toeplitz_adjoint,
    toeplitzify,
)

__all__ = [
    "DenoiseConfig",
    "project_ball_weighted",
    "cadzow_denoise",
    "inexact_prox",
    "rank_ratio",
]

DEFAULT_MAP_ITERATIONS = 10


@dataclass(frozen=True)
class DenoiseConfig:
    """Parameters of the alternating projections.

    ``radius`` is the ball radius on the coefficient vector; ``math.inf``
    switches the ball off, which gives classic Cadzow denoising.
    """

    rank: int
    order: int
    iterations: int = DEFAULT_MAP_ITERATIONS
    radius: float = math.inf
    svd_tol: float = 1e-10
    seed: int = 0

    def __post_init__(self):
        if self.rank < 1:
            raise ValueError(f"rank must be >= 1, got {self.rank}")
        if self.order < self.rank:
            raise ValueError(f"order P={self.order} must be >= rank K={self.rank}")
        if self.iterations < 0:
            raise ValueError("iterations must be >= 0")
        if not self.radius > 0:
            raise ValueError(f"radius must be positive, got {self.radius}")

    def validate_for(self, M: int) -> None:
        if self.order > M:
            raise ValueError(f"order P={self.order} exceeds half-bandwidth M={M}")


def project_ball_weighted(X, W, rho: float) -> np.ndarray:
    """Project ``X`` on ``{Z : ||W * Z||_F <= rho}`` in the ``W``-weighted norm.

    The projection is a radial shrink: ``X`` is returned as is when inside the
    ball, otherwise rescaled onto its boundary.
    """
    X = np.asarray(X)
    if math.isinf(rho):
        return X.copy()
    Wd = W.dense().real if isinstance(W, ToeplitzEmbedding) else np.asarray(W)
    if Wd.shape != X.shape:
        raise ValueError(f"weight shape {Wd.shape} does not match {X.shape}")
    nrm = np.linalg.norm(Wd * X)
    if nrm <= rho:
        return X.copy()
    return (rho / nrm) * X


def _rank_svd(g: np.ndarray, P: int, K: int, tol: float, seed: int) -> PartialSVD:
    E = ToeplitzEmbedding(g, P)
    try:
        return truncated_svd(E, K, tol=tol, seed=seed)
    except PartialSVDError as exc:
        warnings.warn(f"{exc}; falling back to dense SVD", RuntimeWarning, stacklevel=3)
        U, s, Vh = np.linalg.svd(E.dense(), full_matrices=False)
        return PartialSVD(U[:, :K], s[:K], Vh[:K].conj().T)


def _diagonal_average(svd: PartialSVD, N: int, P: int) -> np.ndarray:
    U, s, V = svd.left_vectors, svd.singular_values, svd.right_vectors
    if (N - P) * (P + 1) <= DENSE_ENTRY_LIMIT:
        summed = toeplitz_adjoint((U * s) @ V.conj().T)
    else:
        summed = lowrank_adjoint(U, s, V)
    return summed / _gamma(N, P)


def _alternating_projections(x, cfg: DenoiseConfig) -> np.ndarray:
    g = np.asarray(x, dtype=complex)
    M = half_bandwidth(g)
    cfg.validate_for(M)
    N, P, K = g.shape[0], cfg.order, cfg.rank
    g = g.copy()
    for _ in range(cfg.iterations):
        if not math.isinf(cfg.radius):
            # ||W * T_P(g)||_F is the Euclidean norm of g
            nrm = np.linalg.norm(g)
            if nrm > cfg.radius:
                g *= cfg.radius / nrm
        svd = _rank_svd(g, P, K, cfg.svd_tol, cfg.seed)
        g = _diagonal_average(svd, N, P)
    return g


def cadzow_denoise(x, cfg: DenoiseConfig) -> np.ndarray:
    """Classic Cadzow denoising of Fourier coefficients.

    Alternates ``n = cfg.iterations`` times between the rank-``K`` set and the
    Toeplitz subspace, starting from ``T_P(x)``, and maps back by diagonal
    averaging. ``cfg.radius`` is ignored.
    """
    if not math.isinf(cfg.radius):
        cfg = DenoiseConfig(cfg.rank, cfg.order, cfg.iterations, math.inf, cfg.svd_tol, cfg.seed)
    return _alternating_projections(x, cfg)


def inexact_prox(x, cfg: DenoiseConfig) -> np.ndarray:
    """Approximate proximal step of the rank + ball constraint.

    Each of the ``n`` passes applies, right to left, the weighted ball
    projection, the unweighted rank-``K`` projection (one EM step from the
    input itself) and the Toeplitz projection. With an infinite radius this is
    :func:`cadzow_denoise`.
    """
    return _alternating_projections(x, cfg)


def rank_ratio(x, K: int, P: int) -> float:
    """``sigma_{K+1} / sigma_K`` of ``T_P(x)``; zero for an exactly rank-K embedding."""
    s = np.linalg.svd(toeplitzify(x, P).dense(), compute_uv=False)
    if K >= s.shape[0] or s[K - 1] == 0:
        return 0.0
    return float(s[K] / s[K - 1])
