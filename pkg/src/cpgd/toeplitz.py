"""Toeplitzification operator and its companions.

A vector ``x`` of odd length ``N = 2M + 1`` holds Fourier coefficients with
logical indices ``-M..M``; storage index ``i`` maps to logical ``i - M``.
For an order ``P`` (``0 <= P <= M``) the Toeplitz embedding ``T_P(x)`` is the
``(N - P) x (P + 1)`` matrix with 0-based entries::

    T_P(x)[i, j] = x[P + i - j]

which is the valid part of the linear convolution of ``x`` with a length
``P + 1`` sequence. Only the generator is stored; the dense form is built on
demand.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import cached_property, lru_cache

import numpy as np
import scipy.linalg
from scipy.sparse.linalg import LinearOperator

__all__ = [
    "ToeplitzEmbedding",
    "half_bandwidth",
    "gamma_weights",
    "toeplitzify",
    "toeplitz_adjoint",
    "toeplitz_pinv",
    "project_toeplitz",
    "toeplitz_matvec",
    "toeplitz_rmatvec",
    "weight_matrix",
    "lowrank_adjoint",
    "fft_length",
]


def half_bandwidth(x) -> int:
    """Return ``M`` for a coefficient vector of length ``2M + 1``."""
    n = np.shape(x)[0]
    if n < 3 or n % 2 == 0:
        raise ValueError(f"coefficient vector must have odd length >= 3, got {n}")
    return (n - 1) // 2


def _check_order(N: int, P: int) -> None:
    if N < 1:
        raise ValueError(f"generator length must be positive, got {N}")
    if not 0 <= P <= N - 1 - P:
        raise ValueError(f"order P={P} out of range for N={N} (need 0 <= P <= {(N - 1) // 2})")


def _shape_to_np(shape) -> tuple[int, int]:
    rows, cols = shape
    if rows < 1 or cols < 1:
        raise ValueError(f"empty matrix shape {shape}")
    N, P = rows + cols - 1, cols - 1
    if P > rows - 1:
        raise ValueError(
            f"shape {shape} is not a Toeplitz embedding shape (needs rows >= cols)"
        )
    return N, P


def fft_length(n: int) -> int:
    """Smallest power of two ``>= n``."""
    return 1 << max(int(n) - 1, 0).bit_length()


@lru_cache(maxsize=64)
def _diagonal_index(N: int, P: int) -> np.ndarray:
    i = np.arange(N - P)[:, None]
    j = np.arange(P + 1)[None, :]
    idx = P + i - j
    idx.setflags(write=False)
    return idx


@lru_cache(maxsize=64)
def _gamma(N: int, P: int) -> np.ndarray:
    i = np.arange(1, N + 1)
    g = np.minimum(np.minimum(i, P + 1), N + 1 - i).astype(float)
    g.setflags(write=False)
    return g


def gamma_weights(N: int, P: int) -> np.ndarray:
    """Diagonal of ``T_P^* T_P``: the number of entries on each diagonal.

    Entry ``i`` (1-based) is ``min(i, P + 1, N + 1 - i)``.
    """
    _check_order(N, P)
    return _gamma(N, P).copy()


@dataclass(frozen=True)
class ToeplitzEmbedding:
    """Toeplitz matrix of shape ``(N - P, P + 1)`` stored through its generator."""

    generator: np.ndarray
    order: int

    def __post_init__(self):
        g = np.asarray(self.generator, dtype=complex)
        if g.ndim != 1:
            raise ValueError("generator must be one-dimensional")
        _check_order(g.shape[0], self.order)
        object.__setattr__(self, "generator", g)

    @property
    def N(self) -> int:
        return self.generator.shape[0]

    @property
    def shape(self) -> tuple[int, int]:
        return (self.N - self.order, self.order + 1)

    @property
    def size(self) -> int:
        r, c = self.shape
        return r * c

    def dense(self) -> np.ndarray:
        P = self.order
        g = self.generator
        return scipy.linalg.toeplitz(g[P:], g[P::-1])

    def __array__(self, dtype=None, copy=None):
        out = self.dense()
        return out if dtype is None else out.astype(dtype)

    @cached_property
    def _spectrum(self) -> np.ndarray:
        # generator FFT, reused by every product with this embedding
        return np.fft.fft(self.generator, fft_length(self.N + self.order))

    @cached_property
    def _adjoint_spectrum(self) -> np.ndarray:
        return np.fft.fft(np.conj(self.generator[::-1]), fft_length(2 * self.N - self.order))

    def matvec(self, u) -> np.ndarray:
        return toeplitz_matvec(self, u)

    def rmatvec(self, v) -> np.ndarray:
        return toeplitz_rmatvec(self, v)

    def frobenius_norm(self) -> float:
        g = _gamma(self.N, self.order)
        return float(np.sqrt(np.sum(g * np.abs(self.generator) ** 2)))

    def aslinearoperator(self) -> LinearOperator:
        return LinearOperator(
            self.shape,
            matvec=self.matvec,
            rmatvec=self.rmatvec,
            dtype=complex,
        )


def toeplitzify(x, P: int) -> ToeplitzEmbedding:
    """Embed ``x`` as the Toeplitz matrix ``T_P(x)``.

    Raises
    ------
    ValueError
        If ``P`` is outside ``[0, M]``.
    """
    x = np.asarray(x, dtype=complex)
    M = half_bandwidth(x)
    if not 0 <= P <= M:
        raise ValueError(f"order P={P} out of range [0, {M}]")
    return ToeplitzEmbedding(x, P)


def toeplitz_adjoint(H) -> np.ndarray:
    """Adjoint of the Toeplitzification: sum of each diagonal of ``H``.

    Output entry ``d`` collects all ``H[i, j]`` with ``i - j = d - P``.
    """
    if isinstance(H, ToeplitzEmbedding):
        return _gamma(H.N, H.order) * H.generator
    H = np.asarray(H, dtype=complex)
    if H.ndim != 2:
        raise ValueError("expected a 2-D matrix")
    N, P = _shape_to_np(H.shape)
    idx = _diagonal_index(N, P).ravel()
    flat = H.ravel()
    re = np.bincount(idx, weights=flat.real, minlength=N)
    im = np.bincount(idx, weights=flat.imag, minlength=N)
    return re + 1j * im


def toeplitz_pinv(H) -> np.ndarray:
    """Pseudoinverse of the Toeplitzification (diagonal averaging)."""
    if isinstance(H, ToeplitzEmbedding):
        return H.generator.copy()
    H = np.asarray(H)
    N, P = _shape_to_np(H.shape)
    return toeplitz_adjoint(H) / _gamma(N, P)


def project_toeplitz(H) -> np.ndarray:
    """Orthogonal (Frobenius) projection of ``H`` onto Toeplitz matrices."""
    H = np.asarray(H)
    _, P = _shape_to_np(H.shape)
    return ToeplitzEmbedding(toeplitz_pinv(H), P).dense()


def _fft_conv(a: np.ndarray, b: np.ndarray, nfft: int) -> np.ndarray:
    return np.fft.ifft(np.fft.fft(a, nfft, axis=0) * np.fft.fft(b, nfft, axis=0), axis=0)


def toeplitz_matvec(E: ToeplitzEmbedding, u) -> np.ndarray:
    """``T_P(x) @ u`` via FFT; ``u`` may be a vector or a stack of columns."""
    u = np.asarray(u, dtype=complex)
    N, P = E.N, E.order
    if u.shape[0] != P + 1:
        raise ValueError(f"expected {P + 1} rows, got {u.shape[0]}")
    nfft = fft_length(N + P)
    G = E._spectrum if u.ndim == 1 else E._spectrum[:, None]
    c = np.fft.ifft(G * np.fft.fft(u, nfft, axis=0), axis=0)
    return c[P:N]


def toeplitz_rmatvec(E: ToeplitzEmbedding, v) -> np.ndarray:
    """``T_P(x)^H @ v`` via FFT."""
    v = np.asarray(v, dtype=complex)
    N, P = E.N, E.order
    if v.shape[0] != N - P:
        raise ValueError(f"expected {N - P} rows, got {v.shape[0]}")
    nfft = fft_length(2 * N - P)
    G = E._adjoint_spectrum if v.ndim == 1 else E._adjoint_spectrum[:, None]
    c = np.fft.ifft(G * np.fft.fft(v, nfft, axis=0), axis=0)
    return c[N - 1 - P : N]


def lowrank_adjoint(left: np.ndarray, s: np.ndarray, right: np.ndarray) -> np.ndarray:
    """``T_P^*(left @ diag(s) @ right^H)`` without forming the product.

    Each rank-one term contributes the convolution of ``left[:, r]`` with the
    reversed conjugate of ``right[:, r]``.
    """
    rows, k = left.shape
    cols = right.shape[0]
    N = rows + cols - 1
    if k == 0:
        return np.zeros(N, dtype=complex)
    nfft = fft_length(N)
    a = left * np.asarray(s)[None, :]
    b = np.conj(right[::-1, :])
    c = _fft_conv(a, b, nfft)[:N]
    return c.sum(axis=1)


def weight_matrix(N: int, P: int) -> ToeplitzEmbedding:
    """Toeplitz weight ``W`` whose generator is ``Gamma^{-1/2}``.

    For a Toeplitz ``Z`` the weighted norm ``||W * Z||_F`` equals the
    Euclidean norm of the generator of ``Z``.
    """
    _check_order(N, P)
    return ToeplitzEmbedding(1.0 / np.sqrt(_gamma(N, P)), P)
