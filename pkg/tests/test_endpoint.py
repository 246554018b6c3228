"""Endpoint Gaussians: fusion arithmetic and reparameterized sampling."""

import numpy as np

from ecdiff.endpoint import (
    DiagGaussian,
    fuse,
    sample_endpoint,
    sample_endpoint_eps,
    standard_endpoint,
)

N_DRAWS = 100_000


def test_standard_endpoint_2d():
    g = standard_endpoint(2)
    assert np.array_equal(g.mean, [0.0, 0.0])
    assert np.array_equal(g.var, [1.0, 1.0])


def test_standard_endpoint_moments():
    g = standard_endpoint(2)
    eps = np.random.default_rng(3).standard_normal((N_DRAWS, 2))
    ys = sample_endpoint_eps(g, eps)
    assert np.max(np.abs(ys.mean(axis=0))) < 0.02
    assert np.max(np.abs(ys.var(axis=0) - 1.0)) < 0.03


def test_fuse_elementwise_sums():
    a = DiagGaussian(np.array([1.0, 0.0]), np.array([1.0, 1.0]))
    b = DiagGaussian(np.array([0.0, 1.0]), np.array([1.0, 1.0]))
    f = fuse(a, b)
    assert np.array_equal(f.mean, [1.0, 1.0])
    assert np.array_equal(f.var, [2.0, 2.0])


def test_fuse_with_standard_adds_unit_variance(rng):
    a = DiagGaussian(rng.standard_normal(3), rng.uniform(0.1, 2.0, 3))
    f = fuse(a, standard_endpoint(3))
    assert np.array_equal(f.mean, a.mean)
    assert np.allclose(f.var, a.var + 1.0, atol=1e-15)


def test_fused_sample_moments_three_se():
    # acceptance-level bound: moments of fused draws within 3 standard errors
    a = DiagGaussian(np.array([0.7, -0.3]), np.array([0.4, 1.3]))
    b = DiagGaussian(np.array([-1.1, 0.2]), np.array([0.9, 0.2]))
    f = fuse(a, b)
    eps = np.random.default_rng(11).standard_normal((N_DRAWS, 2))
    ys = sample_endpoint_eps(f, eps)
    mu, var = a.mean + b.mean, a.var + b.var
    se_mean = np.sqrt(var / N_DRAWS)
    se_var = var * np.sqrt(2.0 / (N_DRAWS - 1))
    assert np.all(np.abs(ys.mean(axis=0) - mu) < 3 * se_mean)
    assert np.all(np.abs(ys.var(axis=0, ddof=1) - var) < 3 * se_var)


def test_variance_floor_degenerate():
    g = DiagGaussian(np.array([2.0, -3.0]), np.array([0.0, 0.0]))
    s = sample_endpoint(g, rng_seed=5)
    floor = np.sqrt(np.maximum(g.var, 1e-12))
    assert np.all(np.abs(s.y - g.mean) <= floor * np.abs(s.eps) + 1e-15)


def test_sample_determinism_seed_42():
    g = DiagGaussian(np.array([0.5, 0.5]), np.array([1.0, 2.0]))
    a = sample_endpoint(g, rng_seed=42)
    b = sample_endpoint(g, rng_seed=42)
    assert np.array_equal(a.y, b.y) and np.array_equal(a.eps, b.eps)


def test_standardized_draws_moment_check():
    g = DiagGaussian(np.array([1.0, -2.0]), np.array([0.5, 3.0]))
    eps = np.random.default_rng(17).standard_normal((N_DRAWS, 2))
    ys = sample_endpoint_eps(g, eps)
    z = (ys - g.mean) / np.sqrt(g.var)
    skew = np.mean(z**3, axis=0)
    kurt = np.mean(z**4, axis=0)
    assert np.all(np.abs(skew) < 0.05)
    assert np.all(np.abs(kurt - 3.0) < 0.1)
