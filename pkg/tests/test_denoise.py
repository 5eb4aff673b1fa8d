import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from cpgd.denoise import (
    DenoiseConfig,
    cadzow_denoise,
    inexact_prox,
    project_ball_weighted,
    rank_ratio,
)
from cpgd.toeplitz import toeplitzify, weight_matrix


def crandn(rng, *shape):
    return rng.standard_normal(shape) + 1j * rng.standard_normal(shape)


def dirac_coefficients(t, a, M):
    m = np.arange(-M, M + 1)
    return np.exp(-2j * np.pi * np.outer(m, t)) @ np.asarray(a, dtype=complex)


def reference_cadzow(x, K, P, n, rho=math.inf):
    """Dense textbook loop: explicit matrices and per-diagonal means."""
    N = x.shape[0]
    rows = N - P
    g = x.astype(complex)
    for _ in range(n):
        if np.linalg.norm(g) > rho:
            g = g * rho / np.linalg.norm(g)
        H = np.array([[g[P + i - j] for j in range(P + 1)] for i in range(rows)])
        U, s, Vh = np.linalg.svd(H)
        H = (U[:, :K] * s[:K]) @ Vh[:K]
        g = np.array([np.mean(np.diagonal(H, offset=P - d)) for d in range(N)])
    return g


STREAM_T = np.array([0.12, 0.33, 0.58, 0.81])
STREAM_A = np.array([1.0, 0.7 + 0.2j, 1.5, 0.4])


def test_config_validation():
    with pytest.raises(ValueError):
        DenoiseConfig(rank=0, order=3)
    with pytest.raises(ValueError):
        DenoiseConfig(rank=4, order=3)
    with pytest.raises(ValueError):
        DenoiseConfig(rank=1, order=3, iterations=-1)
    with pytest.raises(ValueError):
        DenoiseConfig(rank=1, order=3, radius=0.0)
    with pytest.raises(ValueError):
        cadzow_denoise(np.ones(5), DenoiseConfig(rank=1, order=3))


def test_ball_projection_cases():
    rng = np.random.default_rng(0)
    W = weight_matrix(7, 3)
    X = crandn(rng, 4, 4)
    np.testing.assert_array_equal(project_ball_weighted(X, W, math.inf), X)
    X = X * 2 / np.linalg.norm(W.dense() * X)
    out = project_ball_weighted(X, W, 1.0)
    np.testing.assert_allclose(out, X / 2)
    assert np.linalg.norm(W.dense() * out) == pytest.approx(1.0)
    np.testing.assert_array_equal(project_ball_weighted(X, W, 2.0 + 1e-12), X)
    with pytest.raises(ValueError):
        project_ball_weighted(np.ones((3, 3)), W, 1.0)


@settings(max_examples=40)
@given(st.integers(0, 10**6), st.floats(1e-3, 1e3))
def test_ball_projection_feasible(seed, rho):
    rng = np.random.default_rng(seed)
    W = weight_matrix(9, 2)
    X = crandn(rng, 7, 3) * rng.uniform(0, 20)
    out = project_ball_weighted(X, W, rho)
    assert np.linalg.norm(W.dense() * out) <= rho * (1 + 1e-12)


def test_noiseless_is_fixed_point():
    x = dirac_coefficients(STREAM_T, STREAM_A, 8)
    out = cadzow_denoise(x, DenoiseConfig(rank=4, order=8))
    np.testing.assert_allclose(out, x, atol=1e-9 * np.abs(x).max())


def test_zero_iterations_is_identity():
    x = crandn(np.random.default_rng(1), 11)
    np.testing.assert_array_equal(cadzow_denoise(x, DenoiseConfig(2, 5, iterations=0)), x)


def test_reduces_tail_ratio_at_20db():
    rng = np.random.default_rng(2)
    x = dirac_coefficients(STREAM_T, STREAM_A, 10)
    sigma = np.abs(STREAM_A).max() * math.exp(-20 / 10)
    noisy = x + sigma * crandn(rng, x.shape[0])
    out = cadzow_denoise(noisy, DenoiseConfig(rank=4, order=10))
    assert rank_ratio(out, 4, 10) < rank_ratio(noisy, 4, 10)


@pytest.mark.parametrize("P, rho", [(4, math.inf), (6, math.inf), (6, 3.0), (9, 0.5)])
def test_matches_dense_reference(P, rho):
    rng = np.random.default_rng(P)
    x = crandn(rng, 21)
    cfg = DenoiseConfig(rank=3, order=P, iterations=6, radius=rho)
    np.testing.assert_allclose(inexact_prox(x, cfg), reference_cadzow(x, 3, P, 6, rho), atol=1e-10)


def test_matches_reference_on_matrix_free_path():
    rng = np.random.default_rng(9)
    x = dirac_coefficients(STREAM_T, STREAM_A, 70) + 0.05 * crandn(rng, 141)
    cfg = DenoiseConfig(rank=4, order=70, iterations=3)
    assert toeplitzify(x, 70).size > 4096
    np.testing.assert_allclose(cadzow_denoise(x, cfg), reference_cadzow(x, 4, 70, 3), atol=1e-8)


@settings(max_examples=25, deadline=None)
@given(st.integers(0, 10**6))
def test_infinite_radius_equals_cadzow(seed):
    x = crandn(np.random.default_rng(seed), 15)
    cfg = DenoiseConfig(rank=2, order=5, iterations=4)
    np.testing.assert_array_equal(inexact_prox(x, cfg), cadzow_denoise(x, cfg))


def test_cadzow_ignores_radius():
    x = crandn(np.random.default_rng(3), 15)
    a = cadzow_denoise(x, DenoiseConfig(2, 5, radius=0.1))
    b = cadzow_denoise(x, DenoiseConfig(2, 5))
    np.testing.assert_array_equal(a, b)


@settings(max_examples=25, deadline=None)
@given(st.integers(0, 10**6), st.floats(0.01, 2.0))
def test_small_radius_bounds_output(seed, rho):
    x = 5 * crandn(np.random.default_rng(seed), 13)
    out = inexact_prox(x, DenoiseConfig(rank=2, order=4, radius=rho))
    assert np.linalg.norm(out) <= rho + 1e-10


def test_zero_maps_to_zero():
    cfg = DenoiseConfig(rank=2, order=4, radius=1.0)
    np.testing.assert_array_equal(inexact_prox(np.zeros(11, complex), cfg), np.zeros(11))


@settings(max_examples=25, deadline=None)
@given(st.integers(0, 10**6), st.floats(0.1, 10), st.floats(-np.pi, np.pi))
def test_scale_equivariance(seed, r, phi):
    x = crandn(np.random.default_rng(seed), 15)
    c = r * np.exp(1j * phi)
    cfg = DenoiseConfig(rank=2, order=6, iterations=5)
    np.testing.assert_allclose(cadzow_denoise(c * x, cfg), c * cadzow_denoise(x, cfg), atol=1e-10 * r)


def test_many_passes_reach_intersection():
    rng = np.random.default_rng(4)
    x = dirac_coefficients(STREAM_T, STREAM_A, 10) + 1e-6 * crandn(rng, 21)
    out = cadzow_denoise(x, DenoiseConfig(rank=4, order=10, iterations=200))
    s = np.linalg.svd(toeplitzify(out, 10).dense(), compute_uv=False)
    assert np.sqrt(np.sum(s[4:] ** 2)) <= 1e-6 * s[0]


def test_rank_ratio_zero_for_exact():
    x = dirac_coefficients(STREAM_T, STREAM_A, 6)
    assert rank_ratio(x, 4, 6) < 1e-12
    assert rank_ratio(x, 7, 6) == 0.0
