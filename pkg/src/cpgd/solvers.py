"""Reconstruction algorithms for Fourier coefficients from linear measurements.

``cpgd`` is the gradient / Cadzow alternation; ``ls_cadzow`` and ``genfri``
are the two reference methods it is compared against.
"""

from __future__ import annotations

import math
import time
from dataclasses import dataclass, field
from functools import cached_property

import numpy as np
import scipy.linalg

from .denoise import DEFAULT_MAP_ITERATIONS, DenoiseConfig, cadzow_denoise, inexact_prox
from .toeplitz import half_bandwidth, toeplitzify

__all__ = [
    "ForwardModel",
    "SolverConfig",
    "RecoveryTrace",
    "NotInjectiveError",
    "NonFiniteIterateError",
    "spectral_bounds",
    "step_size_range",
    "lipschitz_constant",
    "gradient_step",
    "cpgd_update",
    "cpgd",
    "ls_cadzow",
    "genfri",
    "annihilation_matrix",
    "genfri_x_update",
    "genfri_h_update",
    "genfri_h_update_linearised",
]

INJECTIVITY_RTOL = 1e-10
LSTSQ_CUTOFF = 1e-4
STOP_RULES = ("norm", "step")


class NotInjectiveError(ValueError):
    """The forward matrix has a nontrivial null space."""


class NonFiniteIterateError(FloatingPointError):
    """An iterate contains NaN or infinite entries."""


@dataclass
class ForwardModel:
    """Measurements ``y = G x + noise`` with ``G`` of shape ``(L, N)``."""

    G: np.ndarray
    y: np.ndarray
    sigma: float = 0.0

    def __post_init__(self):
        self.G = np.asarray(self.G, dtype=complex)
        self.y = np.asarray(self.y, dtype=complex)
        if self.G.ndim != 2 or self.G.shape[0] < 1:
            raise ValueError("G must be a non-empty 2-D matrix")
        if self.y.shape != (self.G.shape[0],):
            raise ValueError(f"y has shape {self.y.shape}, expected ({self.G.shape[0]},)")
        half_bandwidth(self.G[0])

    @property
    def L(self) -> int:
        return self.G.shape[0]

    @property
    def N(self) -> int:
        return self.G.shape[1]

    @property
    def M(self) -> int:
        return (self.N - 1) // 2

    @cached_property
    def gram(self) -> np.ndarray:
        return self.G.conj().T @ self.G

    @cached_property
    def Ghy(self) -> np.ndarray:
        return self.G.conj().T @ self.y

    @cached_property
    def singular_values(self) -> np.ndarray:
        return np.linalg.svd(self.G, compute_uv=False)

    @property
    def injective(self) -> bool:
        s = self.singular_values
        return self.L >= self.N and s[-1] > INJECTIVITY_RTOL * s[0]

    def residual(self, x) -> float:
        return float(np.linalg.norm(self.G @ x - self.y))


@dataclass
class SolverConfig:
    """Parameters shared by the solvers.

    ``tau=None`` selects ``1/beta``; ``radius=None`` selects infinity for an
    injective model and ``||y||_2`` otherwise. ``stop_rule="norm"`` stops CPGD
    when ``| ||x_{k+1}|| - ||x_k|| | < rel_tol ||x_k||``; ``"step"`` uses
    ``||x_{k+1} - x_k|| < rel_tol ||x_k||`` instead.
    """

    K: int
    P: int | None = None
    tau: float | None = None
    radius: float | None = None
    map_iterations: int = DEFAULT_MAP_ITERATIONS
    max_iter: int = 500
    rel_tol: float = 1e-4
    seed: int = 0
    stop_rule: str = "norm"

    def __post_init__(self):
        if self.stop_rule not in STOP_RULES:
            raise ValueError(f"stop_rule must be one of {STOP_RULES}, got {self.stop_rule!r}")
        if self.rel_tol <= 0:
            raise ValueError("rel_tol must be positive")
        if self.max_iter < 1:
            raise ValueError("max_iter must be >= 1")
        if self.tau is not None and not 0 < self.tau < math.inf:
            raise ValueError(f"tau must be positive and finite, got {self.tau}")

    def order_for(self, M: int) -> int:
        P = M if self.P is None else self.P
        if not self.K <= P <= M:
            raise ValueError(f"need K <= P <= M, got K={self.K}, P={P}, M={M}")
        return P


@dataclass
class RecoveryTrace:
    coefficients: np.ndarray
    iterations: int
    residuals: list[float] = field(default_factory=list)
    rel_changes: list[float] = field(default_factory=list)
    norm_changes: list[float] = field(default_factory=list)
    converged: bool = False
    wall_time: float = 0.0
    tau: float | None = None
    radius: float | None = None
    method: str = ""
    info: dict = field(default_factory=dict)


def spectral_bounds(G) -> tuple[float, float]:
    """``(alpha, beta) = (2 lambda_min, 2 lambda_max)`` of ``G^H G``."""
    G = np.asarray(G)
    if not np.any(G):
        raise ValueError("G is zero")
    s = np.linalg.svd(G, compute_uv=False)
    beta = 2.0 * s[0] ** 2
    alpha = 2.0 * s[-1] ** 2 if G.shape[0] >= G.shape[1] else 0.0
    return float(alpha), float(beta)


def step_size_range(beta: float, P: int) -> tuple[float, float]:
    """Open interval of step sizes for which the CPGD update is a local contraction."""
    if beta <= 0:
        raise ValueError("beta must be positive")
    if P < 0:
        raise ValueError("P must be non-negative")
    r = 1.0 / math.sqrt(P + 1)
    return (1.0 - r) / beta, (1.0 + r) / beta


def lipschitz_constant(tau: float, alpha: float, beta: float) -> float:
    """Lipschitz constant ``max(|1 - tau alpha|, |1 - tau beta|)`` of a gradient step."""
    return max(abs(1.0 - tau * alpha), abs(1.0 - tau * beta))


def gradient_step(x, model: ForwardModel, tau: float) -> np.ndarray:
    """``x - 2 tau G^H (G x - y)``."""
    x = np.asarray(x, dtype=complex)
    if x.shape != (model.N,):
        raise ValueError(f"x has shape {x.shape}, expected ({model.N},)")
    return x - 2.0 * tau * (model.gram @ x - model.Ghy)


def _resolve(model: ForwardModel, cfg: SolverConfig):
    P = cfg.order_for(model.M)
    tau = cfg.tau
    if tau is None:
        _, beta = spectral_bounds(model.G)
        tau = 1.0 / beta
    radius = cfg.radius
    if radius is None:
        radius = math.inf if model.injective else float(np.linalg.norm(model.y))
    return P, tau, radius


def cpgd_update(x, model: ForwardModel, tau: float, denoiser: DenoiseConfig) -> np.ndarray:
    """One CPGD update: gradient step followed by the inexact proximal step."""
    return inexact_prox(gradient_step(x, model, tau), denoiser)


def _relative(num: float, ref: float) -> float:
    if ref > 0:
        return float(num / ref)
    return 0.0 if num == 0 else math.inf


def cpgd(model: ForwardModel, cfg: SolverConfig, x0=None) -> RecoveryTrace:
    """Cadzow plug-and-play gradient descent.

    Starts from ``x0`` (zero by default) and iterates :func:`cpgd_update`
    until the change selected by ``cfg.stop_rule`` drops below
    ``cfg.rel_tol`` or ``max_iter`` updates are done. The trace keeps both
    the relative step ``||x_{k+1} - x_k|| / ||x_k||`` and the relative norm
    change.

    Raises
    ------
    NonFiniteIterateError
        If an iterate stops being finite.
    """
    t0 = time.perf_counter()
    P, tau, radius = _resolve(model, cfg)
    den = DenoiseConfig(cfg.K, P, cfg.map_iterations, radius, seed=cfg.seed)
    x = np.zeros(model.N, dtype=complex) if x0 is None else np.asarray(x0, dtype=complex)
    trace = RecoveryTrace(x, 0, tau=tau, radius=radius, method="cpgd")
    for k in range(cfg.max_iter):
        x_new = cpgd_update(x, model, tau, den)
        if not np.all(np.isfinite(x_new)):
            raise NonFiniteIterateError(
                f"non-finite CPGD iterate at iteration {k + 1} (tau={tau:.3e})"
            )
        ref = np.linalg.norm(x)
        step = _relative(np.linalg.norm(x_new - x), ref)
        dnorm = _relative(abs(np.linalg.norm(x_new) - ref), ref)
        x = x_new
        trace.iterations = k + 1
        trace.residuals.append(model.residual(x))
        trace.rel_changes.append(step)
        trace.norm_changes.append(dnorm)
        if (dnorm if cfg.stop_rule == "norm" else step) < cfg.rel_tol:
            trace.converged = True
            break
    trace.coefficients = x
    trace.wall_time = time.perf_counter() - t0
    return trace


def ls_cadzow(model: ForwardModel, cfg: SolverConfig) -> RecoveryTrace:
    """Least-squares coefficients (singular-value cutoff ``1e-4``) then Cadzow."""
    t0 = time.perf_counter()
    P = cfg.order_for(model.M)
    x_ls, _, rank, _ = scipy.linalg.lstsq(model.G, model.y, cond=LSTSQ_CUTOFF)
    den = DenoiseConfig(cfg.K, P, cfg.map_iterations, seed=cfg.seed)
    x = cadzow_denoise(x_ls, den)
    trace = RecoveryTrace(
        x,
        1,
        residuals=[model.residual(x)],
        rel_changes=[0.0],
        norm_changes=[0.0],
        converged=True,
        method="ls-cadzow",
        info={"lstsq_rank": int(rank), "x_ls": x_ls},
    )
    trace.wall_time = time.perf_counter() - t0
    return trace


def annihilation_matrix(h, N: int) -> np.ndarray:
    """Matrix ``R(h)`` of shape ``(N - P, N)`` with ``R(h) x = T_P(x) h``."""
    h = np.asarray(h, dtype=complex)
    P = h.shape[0] - 1
    first_col = np.zeros(N - P, dtype=complex)
    first_col[0] = h[P]
    first_row = np.zeros(N, dtype=complex)
    first_row[: P + 1] = h[::-1]
    return scipy.linalg.toeplitz(first_col, first_row)


def genfri_x_update(model: ForwardModel, h) -> np.ndarray:
    """``argmin ||G x - y||^2`` subject to ``T_P(x) h = 0``, via the KKT system.

    Raises
    ------
    numpy.linalg.LinAlgError
        If the KKT matrix is singular.
    """
    N = model.N
    R = annihilation_matrix(h, N)
    m = R.shape[0]
    kkt = np.zeros((N + m, N + m), dtype=complex)
    kkt[:N, :N] = 2.0 * model.gram
    kkt[:N, N:] = R.conj().T
    kkt[N:, :N] = R
    rhs = np.concatenate([2.0 * model.Ghy, np.zeros(m, dtype=complex)])
    sol = np.linalg.solve(kkt, rhs)
    if not np.all(np.isfinite(sol)):
        raise np.linalg.LinAlgError("singular KKT system")
    return sol[:N]


def genfri_h_update(x, P: int, h0) -> np.ndarray:
    """``argmin ||T_P(x) h||^2`` subject to ``<h, h0> = 1``.

    Solved through ``(T^H T + eps I) h = mu h0`` with ``eps = 1e-12 trace``.
    Once ``x`` has been fitted under ``T_P(x) h = 0`` this returns ``h``
    itself, so alternating it with :func:`genfri_x_update` stalls after one
    sweep; it is kept as the ``"annihilation"`` variant of :func:`genfri`.
    """
    T = toeplitzify(x, P).dense()
    A = T.conj().T @ T
    A += 1e-12 * np.trace(A).real * np.eye(P + 1)
    z = scipy.linalg.solve(A, h0, assume_a="pos")
    return z / np.vdot(h0, z)


def genfri_h_update_linearised(model: ForwardModel, x_ls, h_prev, h0) -> np.ndarray:
    """Filter update minimising the data mismatch linearised around ``h_prev``.

    With ``b = x_ls - x`` the constraint ``T_P(x) h = 0`` reads
    ``T_P(x_ls) h = T_P(b) h``, approximated by ``R(h_prev) b``. The update
    solves ``min b^H G^H G b`` subject to ``T_P(x_ls) h = R(h_prev) b`` and
    ``<h, h0> = 1``, a Hermitian KKT system of size ``2 (N + 1)``.

    Raises
    ------
    numpy.linalg.LinAlgError
        If the KKT matrix is singular.
    """
    N = model.N
    P = h0.shape[0] - 1
    m = N - P
    Tb = toeplitzify(x_ls, P).dense()
    R = annihilation_matrix(h_prev, N)
    n = (P + 1) + m + N + 1
    kkt = np.zeros((n, n), dtype=complex)
    a, b, c = P + 1, P + 1 + m, P + 1 + m + N
    kkt[:a, a:b] = Tb.conj().T
    kkt[:a, c] = h0
    kkt[a:b, :a] = Tb
    kkt[a:b, b:c] = -R
    kkt[b:c, a:b] = -R.conj().T
    kkt[b:c, b:c] = model.gram
    kkt[c, :a] = h0.conj()
    rhs = np.zeros(n, dtype=complex)
    rhs[-1] = 1.0
    sol = np.linalg.solve(kkt, rhs)
    if not np.all(np.isfinite(sol)):
        raise np.linalg.LinAlgError("singular filter-update system")
    return sol[:a]


GENFRI_H_UPDATES = ("linearised", "annihilation")


def genfri(
    model: ForwardModel,
    cfg: SolverConfig,
    inner_iters: int = 50,
    inits: int = 15,
    h_update: str = "linearised",
) -> RecoveryTrace:
    """Alternating minimisation over coefficients and annihilating filter.

    Each of ``inits`` random starts draws ``h0`` from a circular complex
    Gaussian and runs ``inner_iters`` sweeps of a filter update followed by
    the constrained coefficient update; the run with the smallest data
    mismatch wins. ``h_update`` picks :func:`genfri_h_update_linearised`
    (default) or :func:`genfri_h_update`.

    Raises
    ------
    NotInjectiveError
        If ``G`` is not injective.
    """
    if h_update not in GENFRI_H_UPDATES:
        raise ValueError(f"h_update must be one of {GENFRI_H_UPDATES}, got {h_update!r}")
    if not model.injective:
        raise NotInjectiveError(
            "GenFRI requires an injective forward matrix G (need 2M + 1 <= L "
            "and distinct sampling times)"
        )
    t0 = time.perf_counter()
    P = cfg.order_for(model.M)
    rng = np.random.default_rng(cfg.seed)
    x_ls = np.linalg.lstsq(model.G, model.y, rcond=None)[0]
    best = None
    constraint_log = []
    for _init in range(inits):
        for _attempt in range(5):
            h0 = (rng.standard_normal(P + 1) + 1j * rng.standard_normal(P + 1)) / math.sqrt(2)
            h = h0.copy()
            x = x_ls
            residuals, changes, dnorms, log = [], [], [], []
            try:
                for _ in range(inner_iters):
                    if h_update == "linearised":
                        h = genfri_h_update_linearised(model, x_ls, h, h0)
                    else:
                        h = genfri_h_update(x, P, h0)
                    if not np.all(np.isfinite(h)):
                        raise np.linalg.LinAlgError("non-finite filter")
                    x_new = genfri_x_update(model, h)
                    ref = np.linalg.norm(x)
                    changes.append(_relative(np.linalg.norm(x_new - x), ref))
                    dnorms.append(_relative(abs(np.linalg.norm(x_new) - ref), ref))
                    x = x_new
                    residuals.append(model.residual(x))
                    T = toeplitzify(x, P)
                    log.append(
                        (
                            float(abs(np.vdot(h0, h) - 1.0)),
                            float(np.linalg.norm(T.matvec(h)) / max(T.frobenius_norm(), 1e-300)),
                        )
                    )
            except np.linalg.LinAlgError:
                continue
            break
        else:
            continue
        constraint_log.append(log)
        if best is None or residuals[-1] < best[0]:
            best = (residuals[-1], x, h, residuals, changes, dnorms)
    if best is None:
        raise np.linalg.LinAlgError("GenFRI failed on every initialisation")
    _, x, h, residuals, changes, dnorms = best
    return RecoveryTrace(
        x,
        len(residuals),
        residuals=residuals,
        rel_changes=changes,
        norm_changes=dnorms,
        converged=True,
        wall_time=time.perf_counter() - t0,
        method="genfri",
        info={"filter": h, "constraint_log": constraint_log, "h_update": h_update},
    )
