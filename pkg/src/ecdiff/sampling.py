"""Deterministic DDIM sampling with 1/2/3-pass guidance accounting.

The denoiser is evaluated on a uniform grid of times from 1 - t_eps down to
t_eps; each update re-composes z from the current data and noise estimates
at the next time. The final update targets t = 0 (alpha=1, sigma=0), so the
last state is exactly the model's data estimate.

Guidance combines v predictions directly: the combination is affine with
coefficients summing to one, so it is identical to combining eps predictions
and then converting (both conversions are affine in v with the same z term).
"""

import time
from dataclasses import dataclass

import numpy as np

from .denoiser import Denoiser, denoise
from .schedule import Schedule, alpha_sigma, log_snr


class SamplingDiverged(RuntimeError):
    """Raised when the sampler state goes non-finite."""


@dataclass(frozen=True)
class GuidanceConfig:
    mode: str  # "implicit_cfg" | "explicit"
    s_img: float = 1.0  # image-condition scale (s_I); ignored in explicit mode
    s_prompt: float = 1.0  # prompt scale (s_P); ignored in explicit mode
    steps: int = 10
    seed: int = 0

    def __post_init__(self):
        if self.mode not in ("implicit_cfg", "explicit"):
            raise ValueError(f"unknown guidance mode {self.mode!r}")
        if self.steps < 1:
            raise ValueError("steps must be >= 1")

    @property
    def passes(self) -> int:
        """Denoiser evaluations per sampler step (1, 2, or 3)."""
        if self.mode == "explicit" or (self.s_img == 1.0 and self.s_prompt == 1.0):
            return 1
        return 2 if self.s_img == 1.0 else 3


def cfg_combine(e_null_null, e_ctx_null, e_ctx_prompt, s_img: float, s_prompt: float) -> np.ndarray:
    """Two-condition guidance: e_nn + s_I (e_cn - e_nn) + s_P (e_cp - e_cn)."""
    a = np.asarray(e_null_null, dtype=np.float64)
    b = np.asarray(e_ctx_null, dtype=np.float64)
    c = np.asarray(e_ctx_prompt, dtype=np.float64)
    if a.shape != b.shape or b.shape != c.shape:
        raise ValueError(f"shape mismatch: {a.shape}, {b.shape}, {c.shape}")
    return a + s_img * (b - a) + s_prompt * (c - b)


def gamma_combine(s_uncond, s_cond, gamma: float) -> np.ndarray:
    """Single-condition guidance: (1 - gamma) s_uncond + gamma s_cond."""
    u = np.asarray(s_uncond, dtype=np.float64)
    c = np.asarray(s_cond, dtype=np.float64)
    if u.shape != c.shape:
        raise ValueError(f"shape mismatch: {u.shape} vs {c.shape}")
    return (1.0 - gamma) * u + gamma * c


def eval_times(sched: Schedule, steps: int) -> np.ndarray:
    """The times at which the denoiser is called: 1-t_eps down to t_eps."""
    if steps == 1:
        return np.array([1.0 - sched.t_eps])
    return np.linspace(1.0 - sched.t_eps, sched.t_eps, steps)


@dataclass(frozen=True)
class SampleResult:
    final: np.ndarray
    trajectory: np.ndarray  # (steps + 1, ..., d): start plus each update
    denoiser_calls: int
    wall_time_us: float


def _guided_v(den: Denoiser, z, lam, ctx, pemb, g: GuidanceConfig) -> np.ndarray:
    if g.mode == "explicit":
        return denoise(den, z, lam, pemb=pemb if den.cfg.uses_prompt_input else None)
    if g.passes == 1:
        return denoise(den, z, lam, ctx, pemb)
    e_cp = denoise(den, z, lam, ctx, pemb)
    e_cn = denoise(den, z, lam, ctx, None)
    if g.passes == 2:
        return cfg_combine(e_cn, e_cn, e_cp, g.s_img, g.s_prompt)
    e_nn = denoise(den, z, lam, None, None)
    return cfg_combine(e_nn, e_cn, e_cp, g.s_img, g.s_prompt)


def ddim_sample(den: Denoiser, sched: Schedule, start, condition, g: GuidanceConfig) -> SampleResult:
    """Run the sampler from one start point or a batch of them.

    start: (d,) or (n, d). condition: (ctx, pemb) tuple; entries may be
    single vectors, (n, .) arrays, or None (null / not applicable).
    """
    t0 = time.perf_counter()
    ctx, pemb = condition
    z = np.asarray(start, dtype=np.float64)
    single = z.ndim == 1
    if z.shape[-1] != den.cfg.data_dim:
        raise ValueError(f"start dim {z.shape[-1]} does not match model ({den.cfg.data_dim})")

    ts = eval_times(sched, g.steps)
    traj = [z]
    for k, t in enumerate(ts):
        a, s = alpha_sigma(sched, t)
        v_hat = _guided_v(den, z, log_snr(sched, t), ctx, pemb, g)
        x_hat = a * z - s * v_hat
        y_hat = s * z + a * v_hat
        if k + 1 < len(ts):
            a2, s2 = alpha_sigma(sched, ts[k + 1])
            z = a2 * x_hat + s2 * y_hat
        else:
            z = x_hat  # terminal step to t=0: alpha=1, sigma=0
        if not np.isfinite(z).all():
            raise SamplingDiverged(f"non-finite sampler state at step {k} (t={t:.4f})")
        traj.append(z)

    wall = (time.perf_counter() - t0) * 1e6
    calls = g.passes * g.steps * (1 if single else z.shape[0])
    return SampleResult(z, np.stack(traj), calls, wall)
