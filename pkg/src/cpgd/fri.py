"""Periodic Dirac streams, irregular time sampling and annihilating-filter recovery."""

from __future__ import annotations

import csv
import math
import warnings
from dataclasses import dataclass

import numpy as np

from .lowrank import tls_nullvector
from .solvers import ForwardModel
from .toeplitz import half_bandwidth, toeplitzify

__all__ = [
    "DiracStream",
    "SamplingScheme",
    "RankDeficiencyWarning",
    "circular_gaps",
    "fourier_coefficients",
    "dirichlet_kernel",
    "build_forward_matrix",
    "psnr_to_sigma",
    "synthesize_measurements",
    "recover_locations",
    "recover_amplitudes",
    "random_stream",
    "random_sampling",
    "separated_uniform",
]


class RankDeficiencyWarning(RuntimeWarning):
    """The Vandermonde system for the amplitudes is numerically rank deficient."""


def circular_gaps(t) -> np.ndarray:
    """Pairwise circular distances on the unit period (upper triangle, flattened)."""
    t = np.asarray(t, dtype=float)
    d = np.abs(t[:, None] - t[None, :])
    d = np.minimum(d, 1.0 - d)
    return d[np.triu_indices(t.shape[0], 1)]


@dataclass
class DiracStream:
    """``K`` Diracs with locations in ``[0, period)`` and complex amplitudes."""

    locations: np.ndarray
    amplitudes: np.ndarray
    period: float = 1.0

    def __post_init__(self):
        self.locations = np.atleast_1d(np.asarray(self.locations, dtype=float))
        self.amplitudes = np.atleast_1d(np.asarray(self.amplitudes, dtype=complex))
        if self.locations.shape != self.amplitudes.shape or self.locations.ndim != 1:
            raise ValueError("locations and amplitudes must be 1-D of equal length")
        if self.K < 1:
            raise ValueError("a stream needs at least one Dirac")
        if self.period <= 0:
            raise ValueError("period must be positive")
        if np.any(self.locations < 0) or np.any(self.locations >= self.period):
            raise ValueError("locations must lie in [0, period)")

    @property
    def K(self) -> int:
        return self.locations.shape[0]

    def min_separation(self) -> float:
        if self.K < 2:
            return math.inf
        return float(circular_gaps(self.locations / self.period).min())

    def to_csv(self, path) -> None:
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["t", "amplitude_re", "amplitude_im"])
            for t, a in zip(self.locations, self.amplitudes):
                w.writerow([repr(float(t)), repr(float(a.real)), repr(float(a.imag))])

    @classmethod
    def from_csv(cls, path, period: float = 1.0) -> "DiracStream":
        with open(path, newline="") as fh:
            rows = list(csv.DictReader(fh))
        t = [float(r["t"]) for r in rows]
        a = [complex(float(r["amplitude_re"]), float(r["amplitude_im"])) for r in rows]
        return cls(np.array(t), np.array(a), period)


@dataclass
class SamplingScheme:
    """Sampling times in ``[0, 1)`` for a low-pass filter of bandwidth ``2M + 1``."""

    times: np.ndarray
    M: int

    def __post_init__(self):
        self.times = np.atleast_1d(np.asarray(self.times, dtype=float))
        if self.times.ndim != 1 or self.times.shape[0] < 1:
            raise ValueError("need at least one sampling time")
        if self.M < 0:
            raise ValueError("M must be non-negative")

    @property
    def L(self) -> int:
        return self.times.shape[0]

    @property
    def N(self) -> int:
        return 2 * self.M + 1

    def to_csv(self, path) -> None:
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["theta"])
            for t in self.times:
                w.writerow([repr(float(t))])

    @classmethod
    def from_csv(cls, path, M: int) -> "SamplingScheme":
        with open(path, newline="") as fh:
            rows = list(csv.DictReader(fh))
        return cls(np.array([float(r["theta"]) for r in rows]), M)


def fourier_coefficients(stream: DiracStream, M: int) -> np.ndarray:
    """``x_m = sum_k a_k exp(-j 2 pi m t_k / T)`` for ``m = -M..M``."""
    if M < stream.K:
        warnings.warn(
            f"M={M} < K={stream.K}: too few coefficients for unique recovery",
            RuntimeWarning,
            stacklevel=2,
        )
    m = np.arange(-M, M + 1)
    phase = np.exp(-2j * np.pi * np.outer(m, stream.locations / stream.period))
    return phase @ stream.amplitudes


def dirichlet_kernel(t, M: int):
    """Periodic sinc ``sin((2M+1) pi t) / ((2M+1) sin(pi t))``, equal to 1 at integers."""
    t = np.asarray(t, dtype=float)
    n = 2 * M + 1
    # reduce to [-1/2, 1/2] so sin(pi t) only vanishes at t = 0; n odd keeps the ratio 1-periodic
    r = t - np.round(t)
    small = np.abs(r) < 1e-12
    den = np.where(small, 1.0, n * np.sin(np.pi * r))
    val = np.where(small, 1.0, np.sin(n * np.pi * r) / den)
    return val if val.ndim else float(val)


def build_forward_matrix(scheme: SamplingScheme) -> np.ndarray:
    """``G[l, m] = exp(j 2 pi m theta_l)`` with columns ordered ``m = -M..M``."""
    m = np.arange(-scheme.M, scheme.M + 1)
    return np.exp(2j * np.pi * np.outer(scheme.times, m))


def psnr_to_sigma(psnr_db: float, amplitudes) -> float:
    """Noise level ``max_k |a_k| exp(-PSNR / 10)``."""
    return float(np.max(np.abs(amplitudes)) * math.exp(-psnr_db / 10.0))


def synthesize_measurements(
    stream: DiracStream, scheme: SamplingScheme, sigma: float, seed=None
) -> ForwardModel:
    """Noisy low-pass samples ``y = G x + eps`` with real Gaussian ``eps``."""
    if sigma < 0:
        raise ValueError("sigma must be non-negative")
    G = build_forward_matrix(scheme)
    x = fourier_coefficients(stream, scheme.M)
    y = G @ x
    if sigma > 0:
        rng = np.random.default_rng(seed)
        y = y + sigma * rng.standard_normal(scheme.L)
    return ForwardModel(G, y, sigma)


def _roots_from_filter(h: np.ndarray) -> np.ndarray:
    """Roots of ``sum_k h_k z^{-k}``, i.e. of the polynomial ``h_0 z^P + ... + h_P``."""
    nz = np.flatnonzero(np.abs(h) > 0)
    if nz.size == 0:
        return np.array([], dtype=complex)
    h = h[nz[0] : nz[-1] + 1]
    if h.shape[0] < 2:
        return np.array([], dtype=complex)
    # companion matrix eigenvalues
    return np.roots(h)


def recover_locations(x, K: int, P: int | None = None) -> np.ndarray:
    """Dirac locations in ``[0, 1)`` from Fourier coefficients.

    The annihilating filter is the total-least-squares null vector of
    ``T_P(x)``; among its ``P`` roots the ``K`` closest to the unit circle are
    kept and mapped to ``t = -arg(u) / (2 pi) mod 1``.

    Raises
    ------
    ValueError
        If fewer than ``K`` finite roots exist.
    """
    x = np.asarray(x, dtype=complex)
    M = half_bandwidth(x)
    P = M if P is None else P
    if not 1 <= K <= P <= M:
        raise ValueError(f"need 1 <= K <= P <= M, got K={K}, P={P}, M={M}")
    h = tls_nullvector(toeplitzify(x, P))
    roots = _roots_from_filter(h)
    roots = roots[np.isfinite(roots) & (roots != 0)]
    if roots.shape[0] < K:
        raise ValueError(f"degenerate annihilating filter: {roots.shape[0]} roots for K={K}")
    dist = np.abs(1.0 - np.abs(roots))
    order = np.lexsort((-np.abs(roots), dist))
    u = roots[order[:K]]
    u = u / np.abs(u)
    t = np.mod(-np.angle(u) / (2 * np.pi), 1.0)
    # mod can return exactly 1.0 for tiny negative inputs
    t[t >= 1.0] = 0.0
    return np.sort(t)


def recover_amplitudes(x, locations) -> np.ndarray:
    """Least-squares amplitudes from the Vandermonde system ``x_m = sum_k a_k u_k^m``."""
    x = np.asarray(x, dtype=complex)
    M = half_bandwidth(x)
    t = np.atleast_1d(np.asarray(locations, dtype=float))
    m = np.arange(-M, M + 1)
    V = np.exp(-2j * np.pi * np.outer(m, t))
    a, _, rank, sv = np.linalg.lstsq(V, x, rcond=None)
    if rank < t.shape[0] or (sv.size and sv[-1] < 1e-10 * sv[0]):
        warnings.warn(
            "locations nearly coincide; amplitude system is rank deficient",
            RankDeficiencyWarning,
            stacklevel=2,
        )
    return a


def separated_uniform(n: int, min_sep: float, rng) -> np.ndarray:
    """``n`` sorted points on the unit circle, uniform given all gaps ``>= min_sep``.

    Rejecting whole draws until the separation holds targets this law but
    almost never terminates for dense sets (73 points at 0.005 are accepted
    with probability ``(1 - 73 * 0.005)**72 ~ 1e-14``). The law is sampled
    directly instead: uniform gaps on a circle shortened by ``n * min_sep``,
    each widened by ``min_sep``, then a uniform rotation.
    """
    if n < 1:
        raise ValueError("n must be >= 1")
    if n * min_sep >= 1:
        raise ValueError(f"cannot separate {n} points by {min_sep} on the unit circle")
    rng = np.random.default_rng(rng)
    slack = 1.0 - n * min_sep
    u = np.sort(rng.uniform(0.0, slack, n)) + min_sep * np.arange(n)
    t = np.mod(u + rng.uniform(), 1.0)
    t[t >= 1.0] = 0.0
    return np.sort(t)


def random_stream(
    K: int, seed=None, min_sep: float = 0.01, *, log_mean: float = 0.0, log_std: float = 1.0
) -> DiracStream:
    """Random 1-periodic stream: separated uniform locations, log-normal amplitudes."""
    if K < 1:
        raise ValueError("K must be >= 1")
    rng = np.random.default_rng(seed)
    t = separated_uniform(K, min_sep, rng)
    a = rng.lognormal(log_mean, log_std, size=K)
    return DiracStream(t, a.astype(complex))


def random_sampling(L: int, M: int, seed=None, min_sep: float = 0.005) -> SamplingScheme:
    """``L`` separated uniform sampling times in ``[0, 1)``."""
    if L < 1:
        raise ValueError("L must be >= 1")
    return SamplingScheme(separated_uniform(L, min_sep, seed), M)
