"""Weighted v-prediction training in both conditioning regimes.

Implicit: the trajectory ends at N(0, I) and the condition reaches the net
only as inputs, with dropout to learned null vectors so guidance has its
unconditional branches. Explicit: the trajectory ends at the condition's
fused Gaussian and the net may see nothing but (z_t, lambda_t).

Loss per element: w(lambda_t) * (-dlambda_t/dt) * ||v_hat - v||^2 with
v = alpha_t * noise - sigma_t * x. The weight is pi / alpha_t^2, spanning
five orders of magnitude over the clamped t range, so the training loop
importance-samples t with density proportional to alpha_t^2: per-element
losses keep the exact weight while the effective objective stays flat in t
(a uniform-t draw would starve everything below t ~ 0.9 of gradient).
"""

from dataclasses import dataclass

import numpy as np

from .denoiser import LAMBDA_DIM, Denoiser, DenoiserConfig, denoiser_input, init_denoiser
from .endpoint import VAR_FLOOR
from .mlp import AdamState, adam_step, backward, forward, mlp_arrays, mlp_from_arrays
from .promptvae import PromptVae, encode_prompt
from .schedule import Schedule, alpha_sigma, coeffs_weights
from .tasks import EditTriple


class TrainingDiverged(RuntimeError):
    """Raised when the loss goes non-finite or crosses the divergence bound."""


def draw_times(rng: np.random.Generator, n: int, sched: Schedule) -> np.ndarray:
    """Draw t with density 1 + cos(pi t), the inverse of the loss weight.

    Inverse CDF of F(t) = t + sin(pi t)/pi by Newton iteration; F' >= 0 and
    the iterate stays in [0, 1], so eight steps reach float64 roundoff.
    """
    u = rng.random(n)
    t = u.copy()
    for _ in range(8):
        f = t + np.sin(np.pi * t) / np.pi - u
        fp = 1.0 + np.cos(np.pi * t)
        t = np.clip(t - f / np.maximum(fp, 1e-12), 0.0, 1.0)
    return np.clip(t, sched.t_eps, 1.0 - sched.t_eps)


@dataclass(frozen=True)
class TrainConfig:
    mode: str  # "implicit" | "explicit"
    steps: int = 3000
    batch: int = 128
    lr: float = 2e-3
    drop_ctx: float = 0.05  # implicit only
    drop_prompt: float = 0.05  # implicit only
    drop_both: float = 0.05  # forced both-null share, implicit only
    extra_tokens: bool = True  # explicit only
    hidden: tuple = (64, 64)
    embed_dim: int = 16
    seed: int = 0
    div_threshold: float = 1e6

    def __post_init__(self):
        if self.mode not in ("implicit", "explicit"):
            raise ValueError(f"unknown training mode {self.mode!r}")
        if self.steps < 1 or self.batch < 1:
            raise ValueError("steps and batch must be >= 1")
        for name in ("drop_ctx", "drop_prompt", "drop_both"):
            r = getattr(self, name)
            if not 0.0 <= r <= 1.0:
                raise ValueError(f"{name} must lie in [0, 1], got {r}")
        object.__setattr__(self, "hidden", tuple(int(h) for h in self.hidden))


def v_target(sched: Schedule, t, x, noise) -> np.ndarray:
    """v = alpha_t * noise - sigma_t * x (noise is eps or y per regime)."""
    a, s = alpha_sigma(sched, t)
    return a * np.asarray(noise) - s * np.asarray(x)


def recover_x(sched: Schedule, t, z, v) -> np.ndarray:
    """x_hat = alpha_t z - sigma_t v; exact inverse given alpha^2+sigma^2=1."""
    a, s = alpha_sigma(sched, t)
    return a * np.asarray(z) - s * np.asarray(v)


def recover_noise(sched: Schedule, t, z, v) -> np.ndarray:
    """noise_hat = sigma_t z + alpha_t v; exact inverse of the forward map."""
    a, s = alpha_sigma(sched, t)
    return s * np.asarray(z) + a * np.asarray(v)


def _input_slices(cfg: DenoiserConfig):
    # column ranges of the assembled network input
    d = cfg.data_dim
    lo = d + LAMBDA_DIM
    ctx = slice(lo, lo + d) if cfg.mode == "implicit" else None
    lo = lo + d if cfg.mode == "implicit" else lo
    pro = slice(lo, lo + cfg.embed_dim) if cfg.uses_prompt_input else None
    return ctx, pro


def batch_loss(
    den: Denoiser,
    sched: Schedule,
    x: np.ndarray,
    t: np.ndarray,
    noise: np.ndarray,
    ctx_in,
    pemb_in,
    drop_ctx_mask=None,
    drop_prompt_mask=None,
):
    """Weighted batch loss with all gradients.

    ctx_in/pemb_in must already have null rows substituted; the masks say
    which rows those were, so the null vectors receive their input grads.
    Returns (loss, net_grads, d_null_ctx, d_null_prompt).
    """
    n = x.shape[0]
    alpha, sigma, lam, weight = coeffs_weights(sched, t)
    z = alpha[:, None] * x + sigma[:, None] * noise
    v = alpha[:, None] * noise - sigma[:, None] * x

    xin = denoiser_input(den, z, lam, ctx_in, pemb_in)
    v_hat, tape = forward(den.net, xin)
    res = v_hat - v
    per = weight * np.sum(res**2, axis=1)
    loss = float(np.mean(per))

    dv = (2.0 / n) * weight[:, None] * res
    net_grads, dx_in = backward(den.net, tape, dv)

    d_null_ctx = d_null_prompt = None
    ctx_sl, pro_sl = _input_slices(den.cfg)
    if den.cfg.mode == "implicit":
        mc = np.zeros(n, dtype=bool) if drop_ctx_mask is None else drop_ctx_mask
        mp = np.zeros(n, dtype=bool) if drop_prompt_mask is None else drop_prompt_mask
        d_null_ctx = dx_in[mc][:, ctx_sl].sum(axis=0)
        d_null_prompt = dx_in[mp][:, pro_sl].sum(axis=0)
    return loss, net_grads, d_null_ctx, d_null_prompt


def training_loss(
    den: Denoiser,
    sched: Schedule,
    triple: EditTriple,
    t: float,
    noise_draw: np.ndarray,
    *,
    embeddings: np.ndarray,
    drop_ctx: bool = False,
    drop_prompt: bool = False,
):
    """Single-element loss with injected randomness (the unit-test surface).

    noise_draw is eps in implicit mode and the endpoint draw y in explicit
    mode; the batched loop below is what training actually runs.
    """
    x = np.asarray(triple.target, dtype=np.float64)[None, :]
    noise = np.asarray(noise_draw, dtype=np.float64)[None, :]
    tb = np.asarray([t], dtype=np.float64)
    pemb = embeddings[triple.prompt_id][None, :] if den.cfg.uses_prompt_input else None
    if den.cfg.mode == "implicit":
        ctx_in = den.null_ctx[None, :] if drop_ctx else np.asarray(triple.context)[None, :]
        pemb_in = den.null_prompt[None, :] if drop_prompt else pemb
        masks = (np.array([drop_ctx]), np.array([drop_prompt]))
    else:
        ctx_in, pemb_in, masks = None, pemb, (None, None)
    loss, net_grads, dnc, dnp = batch_loss(den, sched, x, tb, noise, ctx_in, pemb_in, *masks)
    if not np.isfinite(loss):
        raise TrainingDiverged(f"non-finite loss at t={t}")
    return loss, {"net": net_grads, "null_ctx": dnc, "null_prompt": dnp}


def _dataset_arrays(dataset):
    if isinstance(dataset, tuple) and len(dataset) == 3:
        ctx, pid, tgt = dataset
    else:
        if len(dataset) == 0:
            raise ValueError("empty dataset")
        ctx = np.stack([tr.context for tr in dataset])
        pid = np.asarray([tr.prompt_id for tr in dataset], dtype=np.int64)
        tgt = np.stack([tr.target for tr in dataset])
    if len(ctx) == 0:
        raise ValueError("empty dataset")
    return np.asarray(ctx, np.float64), np.asarray(pid, np.int64), np.asarray(tgt, np.float64)


def train_diffusion(
    dataset,
    cfg: TrainConfig,
    sched: Schedule,
    embeddings: np.ndarray,
    vae: PromptVae | None = None,
    ctx_encoder_std: float = 0.05,
    callback=None,
) -> tuple[Denoiser, list[dict]]:
    """Train a denoiser; deterministic given cfg.seed.

    dataset: list of EditTriple or an (ctx, pid, tgt) array triple.
    embeddings: (K, E) frozen prompt embedding table.
    vae: required in explicit mode (supplies each prompt's endpoint Gaussian).
    callback(step, den): invoked after each update, for checkpoint probes.
    Aborts via TrainingDiverged on non-finite loss or loss > div_threshold.
    """
    ctx, pid, tgt = _dataset_arrays(dataset)
    n, d = tgt.shape
    rng = np.random.default_rng(cfg.seed)
    den_cfg = DenoiserConfig(
        mode=cfg.mode,
        data_dim=d,
        embed_dim=embeddings.shape[1],
        hidden=cfg.hidden,
        extra_tokens=cfg.extra_tokens,
    )
    den = init_denoiser(den_cfg, rng)

    if cfg.mode == "explicit":
        if vae is None:
            raise ValueError("explicit training requires the prompt VAE")
        gs = [encode_prompt(vae, embeddings[k]) for k in range(embeddings.shape[0])]
        p_mean = np.stack([g.mean for g in gs])
        p_var = np.stack([g.var for g in gs])

    values = mlp_arrays(den.net)
    if cfg.mode == "implicit":
        values = values + [den.null_ctx, den.null_prompt]
    state = AdamState.for_arrays(values)
    n_net = len(mlp_arrays(den.net))

    trace = []
    for step in range(cfg.steps):
        idx = rng.integers(0, n, size=cfg.batch)
        t = draw_times(rng, cfg.batch, sched)
        eps = rng.standard_normal((cfg.batch, d))
        x = tgt[idx]
        pemb = embeddings[pid[idx]] if den_cfg.uses_prompt_input else None

        if cfg.mode == "implicit":
            u = rng.random((cfg.batch, 3))
            force = u[:, 0] < cfg.drop_both
            mc = force | (u[:, 1] < cfg.drop_ctx)
            mp = force | (u[:, 2] < cfg.drop_prompt)
            ctx_in = np.where(mc[:, None], den.null_ctx, ctx[idx])
            pemb_in = np.where(mp[:, None], den.null_prompt, pemb)
            loss, net_grads, dnc, dnp = batch_loss(den, sched, x, t, eps, ctx_in, pemb_in, mc, mp)
            flat = [g for pair in net_grads for g in pair] + [dnc, dnp]
        else:
            mean = ctx[idx] + p_mean[pid[idx]]
            var = np.maximum(ctx_encoder_std**2 + p_var[pid[idx]], VAR_FLOOR)
            y = mean + np.sqrt(var) * eps
            loss, net_grads, _, _ = batch_loss(den, sched, x, t, y, None, pemb, None, None)
            flat = [g for pair in net_grads for g in pair]

        if not np.isfinite(loss):
            raise TrainingDiverged(f"non-finite loss at step {step} (mode={cfg.mode}, seed={cfg.seed})")
        if loss > cfg.div_threshold:
            raise TrainingDiverged(
                f"loss {loss:.3e} exceeded divergence threshold {cfg.div_threshold:.1e} "
                f"at step {step} (mode={cfg.mode}, seed={cfg.seed})"
            )

        values = adam_step(values, flat, cfg.lr, state)
        net = mlp_from_arrays(den.net, values[:n_net])
        if cfg.mode == "implicit":
            den = Denoiser(den_cfg, net, values[n_net], values[n_net + 1])
        else:
            den = Denoiser(den_cfg, net)
        trace.append({"step": step, "loss": loss})
        if callback is not None:
            callback(step, den)
    return den, trace
