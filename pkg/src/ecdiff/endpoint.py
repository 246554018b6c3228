"""Endpoint distributions of the diffusion process.

The implicit baseline diffuses into a standard Gaussian. The explicit
regime diffuses into a diagonal Gaussian whose mean/variance are functions
of the conditioning; context and prompt contributions are fused by adding
means and adding variances. Variances are floored at VAR_FLOOR so sampling
and densities stay well-posed even for very confident encoders.
"""

from dataclasses import dataclass

import numpy as np

VAR_FLOOR = 1e-6


@dataclass(frozen=True)
class DiagGaussian:
    mean: np.ndarray
    var: np.ndarray

    def __post_init__(self):
        mean = np.asarray(self.mean, dtype=np.float64)
        var = np.asarray(self.var, dtype=np.float64)
        if mean.ndim != 1 or var.shape != mean.shape:
            raise ValueError(f"mean/var must be equal-length vectors, got {mean.shape}, {var.shape}")
        if mean.shape[0] < 1:
            raise ValueError("dimension must be >= 1")
        object.__setattr__(self, "mean", mean)
        object.__setattr__(self, "var", np.maximum(var, VAR_FLOOR))

    @property
    def dim(self) -> int:
        return self.mean.shape[0]


@dataclass(frozen=True)
class EndpointSample:
    """A draw y together with the standard-normal eps that produced it."""

    y: np.ndarray
    eps: np.ndarray


def standard_endpoint(d: int) -> DiagGaussian:
    """N(0, I) in d dimensions."""
    if d < 1:
        raise ValueError(f"dimension must be >= 1, got {d}")
    return DiagGaussian(np.zeros(d), np.ones(d))


def fuse(a: DiagGaussian, b: DiagGaussian) -> DiagGaussian:
    """Fuse two endpoint Gaussians: means add, variances add.

    Variances add (rather than average), so the fused endpoint is wider
    than either input; this is deliberate and matched by the sampler.
    """
    if a.dim != b.dim:
        raise ValueError(f"dimension mismatch: {a.dim} vs {b.dim}")
    return DiagGaussian(a.mean + b.mean, a.var + b.var)


def sample_endpoint(g: DiagGaussian, rng_seed: int) -> EndpointSample:
    """Reparameterized draw y = mean + sqrt(var) * eps, eps ~ N(0, I).

    Deterministic in rng_seed: the same seed yields the same sample.
    """
    eps = np.random.default_rng(rng_seed).standard_normal(g.dim)
    return EndpointSample(g.mean + np.sqrt(g.var) * eps, eps)


def sample_endpoint_eps(g: DiagGaussian, eps: np.ndarray) -> np.ndarray:
    """Reparameterization with an externally supplied standard-normal draw.

    eps may be (d,) or (n, d); broadcasting follows numpy rules.
    """
    return g.mean + np.sqrt(g.var) * np.asarray(eps, dtype=np.float64)


def forward_point(sched, t: float, x, y) -> np.ndarray:
    """Forward map z_t = alpha_t x + sigma_t y (linear in both arguments)."""
    from .schedule import alpha_sigma

    x = np.asarray(x, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    if x.shape != y.shape:
        raise ValueError(f"shape mismatch: {x.shape} vs {y.shape}")
    alpha, sigma = alpha_sigma(sched, t)
    return alpha * x + sigma * y
