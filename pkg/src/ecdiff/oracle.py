"""Closed-form score oracles for the synthetic editing tasks.

Everything observable about the toy tasks is a finite isotropic Gaussian
mixture, so marginals of the forward process, scores, gamma-powered guided
scores and the implicit prompt classifier all have exact expressions. These
are the ground truth that trained denoisers are checked against.
"""

from dataclasses import dataclass

import numpy as np
from scipy.special import logsumexp

from .endpoint import DiagGaussian
from .schedule import Schedule, alpha_sigma
from .tasks import EditTask, isotropy_scale

MOLLIFIER_GRID = 100_000


@dataclass(frozen=True)
class GaussianMixture:
    """Mixture of axis-aligned Gaussians: weights (K,), means (K,d), vars (K,d)."""

    weights: np.ndarray
    means: np.ndarray
    vars: np.ndarray

    def __post_init__(self):
        w = np.asarray(self.weights, dtype=np.float64)
        m = np.asarray(self.means, dtype=np.float64)
        v = np.asarray(self.vars, dtype=np.float64)
        if m.ndim != 2 or w.shape != (m.shape[0],):
            raise ValueError(f"bad mixture shapes: weights {w.shape}, means {m.shape}")
        v = np.broadcast_to(np.atleast_1d(v).reshape(v.shape[0], -1), m.shape).copy()
        if np.any(w <= 0) or abs(w.sum() - 1.0) > 1e-9:
            raise ValueError("mixture weights must be positive and sum to 1")
        if np.any(v <= 0):
            raise ValueError("mixture variances must be positive")
        object.__setattr__(self, "weights", w)
        object.__setattr__(self, "means", m)
        object.__setattr__(self, "vars", v)

    @property
    def dim(self) -> int:
        return self.means.shape[1]


def _component_logpdfs(gm: GaussianMixture, z: np.ndarray) -> np.ndarray:
    # (n, K) log w_k + log N(z_i; m_k, v_k)
    diff = z[:, None, :] - gm.means[None, :, :]  # (n, K, d)
    quad = np.sum(diff**2 / gm.vars[None, :, :], axis=2)
    logdet = np.sum(np.log(2.0 * np.pi * gm.vars), axis=1)  # (K,)
    return np.log(gm.weights)[None, :] - 0.5 * (logdet[None, :] + quad)


def _as_batch(z) -> tuple[np.ndarray, bool]:
    z = np.asarray(z, dtype=np.float64)
    if z.ndim == 1:
        return z[None, :], True
    if z.ndim == 2:
        return z, False
    raise ValueError(f"expected point (d,) or batch (n, d), got shape {z.shape}")


def log_density(gm: GaussianMixture, z) -> np.ndarray:
    """log p(z) under the mixture; z may be (d,) or (n, d)."""
    zb, single = _as_batch(z)
    if zb.shape[1] != gm.dim:
        raise ValueError(f"dim mismatch: z has {zb.shape[1]}, mixture has {gm.dim}")
    out = logsumexp(_component_logpdfs(gm, zb), axis=1)
    return float(out[0]) if single else out


def score(gm: GaussianMixture, z) -> np.ndarray:
    """grad_z log p(z). Responsibilities are formed in log space, so this
    stays finite arbitrarily far into the tails."""
    zb, single = _as_batch(z)
    if zb.shape[1] != gm.dim:
        raise ValueError(f"dim mismatch: z has {zb.shape[1]}, mixture has {gm.dim}")
    lp = _component_logpdfs(gm, zb)  # (n, K)
    resp = np.exp(lp - logsumexp(lp, axis=1, keepdims=True))
    comp_score = (gm.means[None, :, :] - zb[:, None, :]) / gm.vars[None, :, :]
    out = np.sum(resp[:, :, None] * comp_score, axis=1)
    return out[0] if single else out


def data_mixture(task: EditTask, context=None, prompt_id=None) -> GaussianMixture:
    """Mixture form of p(x | condition) at t = 0.

    Both condition slots are optional; omitting one marginalizes it out.
    Needs scaled-orthogonal prompt maps when the context is marginal, since
    only those keep pushforwards of isotropic components isotropic.
    """
    sig2 = task.edit_noise_std**2
    if context is not None:
        c = np.asarray(context, dtype=np.float64)
        pids = [prompt_id] if prompt_id is not None else range(task.n_prompts)
        means = np.stack([task.prompt(p).A @ c + task.prompt(p).b for p in pids])
        k = means.shape[0]
        return GaussianMixture(np.full(k, 1.0 / k), means, np.full(k, sig2))

    mw, mm, mv = task.context_weights, task.context_means, task.context_covs
    pids = [prompt_id] if prompt_id is not None else range(task.n_prompts)
    weights, means, vars_ = [], [], []
    for p in pids:
        pr = task.prompt(p)
        gamma = isotropy_scale(pr)
        for i in range(mw.shape[0]):
            weights.append(mw[i] / len(pids))
            means.append(pr.A @ mm[i] + pr.b)
            vars_.append(gamma * mv[i] + sig2)
    return GaussianMixture(np.array(weights), np.stack(means), np.array(vars_))


def marginal_at_t(
    task: EditTask,
    sched: Schedule,
    t: float,
    context=None,
    prompt_id=None,
    endpoint: DiagGaussian | None = None,
) -> GaussianMixture:
    """Forward marginal p_t(z | condition) as a Gaussian mixture.

    endpoint None means the standard N(0, I) channel; passing a Gaussian
    gives the marginal of z_t = alpha x + sigma y with y ~ endpoint.
    """
    gm = data_mixture(task, context, prompt_id)
    a, s = alpha_sigma(sched, t)
    if endpoint is None:
        e_mean = np.zeros(gm.dim)
        e_var = np.ones(gm.dim)
    else:
        if endpoint.dim != gm.dim:
            raise ValueError("endpoint dimension does not match task")
        e_mean, e_var = endpoint.mean, endpoint.var
    means = a * gm.means + s * e_mean[None, :]
    vars_ = a**2 * gm.vars + s**2 * e_var[None, :]
    return GaussianMixture(gm.weights, means, vars_)


def gamma_score(
    task: EditTask,
    sched: Schedule,
    t: float,
    z,
    gamma: float,
    context=None,
    prompt_id=None,
) -> np.ndarray:
    """Score of the gamma-powered distribution p_t(z)^(1-gamma) p_t(z|cond)^gamma.

    gamma = 0 is the unconditional score, gamma = 1 the conditional one;
    gamma > 1 extrapolates (guidance).
    """
    s_unc = score(marginal_at_t(task, sched, t), z)
    if context is None and prompt_id is None:
        return s_unc  # both marginals coincide, any gamma
    s_con = score(marginal_at_t(task, sched, t, context, prompt_id), z)
    return (1.0 - gamma) * s_unc + gamma * s_con


def guided_score(
    task: EditTask,
    sched: Schedule,
    t: float,
    z,
    context,
    prompt_id: int,
    scale_img: float,
    scale_prompt: float,
) -> np.ndarray:
    """Two-condition guided score used by editing-style CFG:

        s = s(z) + s_I [s(z|c) - s(z)] + s_P [s(z|c,p) - s(z|c)].

    (1, 1) recovers the exact conditional score.
    """
    s_cp = score(marginal_at_t(task, sched, t, context, prompt_id), z)
    if scale_img == 1.0 and scale_prompt == 1.0:
        return s_cp
    s_c = score(marginal_at_t(task, sched, t, context, None), z)
    if scale_img == 1.0:
        return s_c + scale_prompt * (s_cp - s_c)
    s_n = score(marginal_at_t(task, sched, t), z)
    return s_n + scale_img * (s_c - s_n) + scale_prompt * (s_cp - s_c)


def prompt_log_posterior(task: EditTask, sched: Schedule, t: float, z, context=None) -> np.ndarray:
    """log p(prompt | z_t [, context]) for the uniform prompt prior.

    This is the classifier that guidance implicitly sharpens; it is computed
    entirely in log space.
    """
    zb, single = _as_batch(z)
    logs = np.empty((zb.shape[0], task.n_prompts))
    for p in range(task.n_prompts):
        gm = marginal_at_t(task, sched, t, context, p)
        logs[:, p] = log_density(gm, zb) - np.log(task.n_prompts)
    out = logs - logsumexp(logs, axis=1, keepdims=True)
    return out[0] if single else out


def implicit_classifier(
    task: EditTask, sched: Schedule, t: float, z, prompt_id: int, context=None
) -> float | np.ndarray:
    """Posterior probability of one prompt given a noisy sample."""
    task.prompt(prompt_id)  # validate id
    logp = prompt_log_posterior(task, sched, t, z, context)
    return np.exp(logp[..., prompt_id])


def implied_score(sched: Schedule, t: float, z, v_hat, endpoint: DiagGaussian | None = None):
    """Convert a v prediction into the marginal score the model implies.

    With z = alpha x + sigma y and y ~ N(mu, v I), grad_z log p_t(z) equals
    -(z - alpha E[x|z] - sigma mu) / (sigma^2 v); substituting the model's
    x_hat = alpha z - sigma v_hat gives the comparable quantity.
    """
    z = np.asarray(z, dtype=np.float64)
    v_hat = np.asarray(v_hat, dtype=np.float64)
    if z.shape != v_hat.shape:
        raise ValueError(f"z {z.shape} and v_hat {v_hat.shape} must match")
    a, s = alpha_sigma(sched, t)
    x_hat = a * z - s * v_hat
    if endpoint is None:
        mu, var = 0.0, 1.0
    else:
        mu, var = endpoint.mean, endpoint.var
    return -(z - a * x_hat - s * mu) / (s**2 * var)


# ---------------------------------------------------------------------------
# Mollified interval indicator. Used to smooth per-coordinate box constraints
# without touching the score outside a delta-collar of the boundary.


def mollifier(delta: float, x) -> np.ndarray:
    """Smoothed indicator of [0, 1] with transition width delta.

    Zero outside (0, 1), one on [delta, 1 - delta], and a C-infinity bump
    ramp in between:  exp(-delta^2 / (delta^2 - (delta - x)^2) + 1)  on
    (0, delta), mirrored on the right. delta must lie in (0, 1/2).
    """
    if not 0.0 < delta < 0.5:
        raise ValueError(f"delta must be in (0, 0.5), got {delta}")
    arr = np.atleast_1d(np.asarray(x, dtype=np.float64))
    out = np.zeros_like(arr)
    out[(arr >= delta) & (arr <= 1.0 - delta)] = 1.0
    # r is the distance into the ramp from the nearer boundary
    for r in (arr, 1.0 - arr):
        m = (r > 0.0) & (r < delta)
        g = delta - r[m]
        out[m] = np.exp(-(delta**2) / (delta**2 - g**2) + 1.0)
    return out if np.ndim(x) else float(out[0])


def mollifier_grad_sup(delta: float, grid: int = MOLLIFIER_GRID) -> float:
    """sup |d/dx mollifier| from central differences at `grid` points in (0, delta).

    The ramp steepens as delta shrinks, so this quantifies how much score a
    smoothed constraint can inject near the boundary. By symmetry the left
    ramp suffices.
    """
    xs = np.linspace(0.0, delta, grid + 2)  # interior points are the grid
    ys = mollifier(delta, xs)
    d = (ys[2:] - ys[:-2]) / (xs[2:] - xs[:-2])
    return float(np.max(np.abs(d)))


def mollifier_mass(delta: float, grid: int = MOLLIFIER_GRID) -> float:
    """integral of the mollified indicator over [0, 1] (trapezoid rule)."""
    xs = np.linspace(0.0, 1.0, grid)
    return float(np.trapezoid(mollifier(delta, xs), xs))
