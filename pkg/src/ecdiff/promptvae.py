"""Prompt VAE: fixed prompt embeddings -> latent Gaussians in data space.

Each prompt id owns a frozen random unit-norm embedding (stand-in for a
pooled text encoding). A small VAE encodes that embedding into a diagonal
Gaussian with the data's dimensionality; this Gaussian is the prompt's
contribution to the explicit diffusion endpoint. Only the encoder is used
downstream; the decoder exists to make training a proper autoencoder.
"""

import math
from dataclasses import dataclass

import numpy as np

from .endpoint import DiagGaussian
from .mlp import (
    AdamState,
    MlpParams,
    adam_step,
    backward,
    forward,
    init_mlp,
    mlp_arrays,
    mlp_from_arrays,
    mlp_from_dict,
    mlp_to_dict,
)

LOGVAR_MIN = -10.0
LOGVAR_MAX = 4.0
EMBED_SEED = 170_313  # frozen lookup table: embeddings never depend on run seeds


def prompt_embeddings(n_prompts: int, dim: int = 16, seed: int = EMBED_SEED) -> np.ndarray:
    """(K, dim) table of fixed random unit vectors, one per prompt id."""
    if n_prompts < 1 or dim < 1:
        raise ValueError("need n_prompts >= 1 and dim >= 1")
    vecs = np.random.default_rng(seed).standard_normal((n_prompts, dim))
    return vecs / np.linalg.norm(vecs, axis=1, keepdims=True)


@dataclass(frozen=True)
class PromptVae:
    encoder: MlpParams  # E -> hidden -> 2d (mean head, log-variance head)
    decoder: MlpParams  # d -> hidden -> E
    latent_dim: int  # d: matches the data space

    def __post_init__(self):
        if self.encoder.out_dim != 2 * self.latent_dim:
            raise ValueError("encoder must emit mean and log-variance heads of the latent dim")
        if self.decoder.in_dim != self.latent_dim:
            raise ValueError("decoder input must be the latent dim")
        if self.encoder.in_dim != self.decoder.out_dim:
            raise ValueError("decoder must reconstruct the encoder's input space")

    @property
    def embed_dim(self) -> int:
        return self.encoder.in_dim


@dataclass(frozen=True)
class VaeTrainConfig:
    steps: int = 1500
    lr: float = 3e-3
    beta_kl: float = 1e-2
    hidden: int = 64
    latent_dim: int = 2
    seed: int = 0

    def __post_init__(self):
        if self.steps < 1 or self.lr <= 0 or self.beta_kl < 0:
            raise ValueError("need steps >= 1, lr > 0, beta_kl >= 0")


def init_prompt_vae(embed_dim: int, latent_dim: int, hidden: int, rng) -> PromptVae:
    # zeroed heads: a fresh encoder maps everything to N(0, I). No per-sample
    # standardization here: with a 4-point corpus it warps the trunk geometry
    # badly enough that some seeds lock a latent dim into a huge-variance
    # noise carrier that never recovers.
    enc = init_mlp((embed_dim, hidden, 2 * latent_dim), rng=rng, final_scale=0.0)
    dec = init_mlp((latent_dim, hidden, embed_dim), rng=rng)
    return PromptVae(enc, dec, latent_dim)


def encode_prompt(v: PromptVae, p) -> DiagGaussian:
    """Deterministic DiagGaussian for one prompt embedding (d-dimensional)."""
    vec = np.asarray(p, dtype=np.float64)
    if vec.shape != (v.embed_dim,):
        raise ValueError(f"expected embedding of shape ({v.embed_dim},), got {vec.shape}")
    out, _ = forward(v.encoder, vec)
    mu = out[: v.latent_dim]
    lv = np.clip(out[v.latent_dim :], LOGVAR_MIN, LOGVAR_MAX)
    return DiagGaussian(mu, np.exp(lv))


def decode_latent(v: PromptVae, z) -> np.ndarray:
    out, _ = forward(v.decoder, np.asarray(z, dtype=np.float64))
    return out


def kl_standard_normal(mu: np.ndarray, logvar: np.ndarray) -> np.ndarray:
    """KL(N(mu, e^logvar) || N(0, I)) summed over the last axis; always >= 0."""
    return 0.5 * np.sum(np.exp(logvar) + mu**2 - 1.0 - logvar, axis=-1)


def _vae_step(v: PromptVae, prompts: np.ndarray, beta_kl: float, rng):
    """One full-batch loss + gradient evaluation.

    Loss = mean_p [ ||decode(sample(encode(p))) - p||^2 + beta_kl * KL ].
    """
    n, d = prompts.shape[0], v.latent_dim
    enc_out, enc_tape = forward(v.encoder, prompts)
    mu, raw_lv = enc_out[:, :d], enc_out[:, d:]
    lv = np.clip(raw_lv, LOGVAR_MIN, LOGVAR_MAX)
    eps = rng.standard_normal((n, d))
    z = mu + np.exp(0.5 * lv) * eps
    recon, dec_tape = forward(v.decoder, z)

    err = recon - prompts
    kl = float(np.mean(kl_standard_normal(mu, lv)))
    # reported loss uses the posterior mean, not the reparameterized draw:
    # the draw's noise would swamp the converged loss curve while gradients
    # still flow through the sampled z below
    err_mu = forward(v.decoder, mu)[0] - prompts
    recon_loss = float(np.mean(np.sum(err_mu**2, axis=1)))
    loss = recon_loss + beta_kl * kl

    dec_grads, dz = backward(v.decoder, dec_tape, 2.0 * err / n)
    dmu = dz + beta_kl * mu / n
    dlv_recon = dz * eps * 0.5 * np.exp(0.5 * lv)
    dlv_kl = beta_kl * 0.5 * (np.exp(lv) - 1.0) / n
    # the clamp saturates the reconstruction path, but the KL pull always
    # points back inside the window; blocking it too would make a head that
    # ever leaves the clamp range unrecoverable
    inside = (raw_lv > LOGVAR_MIN) & (raw_lv < LOGVAR_MAX)
    dlv = np.where(inside, dlv_recon, 0.0) + dlv_kl
    enc_grads, _ = backward(v.encoder, enc_tape, np.concatenate([dmu, dlv], axis=1))
    return loss, recon_loss, kl, enc_grads, dec_grads


def train_prompt_vae(prompts, cfg: VaeTrainConfig) -> tuple[PromptVae, list[dict]]:
    """Train on the prompt set (full batch); returns (vae, per-step trace)."""
    prompts = np.asarray(prompts, dtype=np.float64)
    if prompts.ndim != 2 or prompts.shape[0] < 2:
        raise ValueError("need at least 2 prompt embeddings")
    rng = np.random.default_rng(cfg.seed)
    v = init_prompt_vae(prompts.shape[1], cfg.latent_dim, cfg.hidden, rng)

    n_enc = len(mlp_arrays(v.encoder))
    values = mlp_arrays(v.encoder) + mlp_arrays(v.decoder)
    state = AdamState.for_arrays(values)
    trace = []
    for step in range(cfg.steps):
        loss, recon, kl, eg, dg = _vae_step(v, prompts, cfg.beta_kl, rng)
        flat = [g for pair in eg for g in pair] + [g for pair in dg for g in pair]
        # cosine decay to zero: the aggressive early rate escapes the
        # stuck-posterior optimum (a too-gentle schedule leaves one latent
        # dim with huge variance), and the vanishing tail keeps the
        # parameter wobble, and with it the loss floor, shrinking
        lr = cfg.lr * 0.5 * (1.0 + math.cos(math.pi * step / max(cfg.steps - 1, 1)))
        values = adam_step(values, flat, lr, state)
        v = PromptVae(
            mlp_from_arrays(v.encoder, values[:n_enc]),
            mlp_from_arrays(v.decoder, values[n_enc:]),
            cfg.latent_dim,
        )
        trace.append({"step": step, "loss": loss, "recon": recon, "kl": kl})
    return v, trace


def vae_to_dict(v: PromptVae) -> dict:
    return {
        "latent_dim": v.latent_dim,
        "encoder": mlp_to_dict(v.encoder),
        "decoder": mlp_to_dict(v.decoder),
    }


def vae_from_dict(d: dict) -> PromptVae:
    return PromptVae(mlp_from_dict(d["encoder"]), mlp_from_dict(d["decoder"]), int(d["latent_dim"]))


# ---------------------------------------------------------------------------
# Paper-scale shape check: 768 -> 1024 -> 16x32x32 -> 4x64x64 -> two heads.
# Random parameters, assertions on dimensions only; nothing is trained here.


def sub_pixel(x: np.ndarray, r: int = 2) -> np.ndarray:
    """Channel groups of r*r redistributed into r x r spatial blocks.

    (C, H, W) -> (C / r^2, H*r, W*r); a pure index permutation.
    """
    c, h, w = x.shape
    if c % (r * r) != 0:
        raise ValueError(f"channels {c} not divisible by {r * r}")
    co = c // (r * r)
    return x.reshape(co, r, r, h, w).transpose(0, 3, 1, 4, 2).reshape(co, h * r, w * r)


def sub_pixel_inverse(x: np.ndarray, r: int = 2) -> np.ndarray:
    co, hr, wr = x.shape
    if hr % r != 0 or wr % r != 0:
        raise ValueError("spatial dims not divisible by the rearrangement factor")
    h, w = hr // r, wr // r
    return x.reshape(co, h, r, w, r).transpose(0, 2, 4, 1, 3).reshape(co * r * r, h, w)


def shape_check_image_mode(seed: int = 0) -> dict:
    """Walk the paper-scale encoder pipeline with random weights.

    Returns {"stages": [{name, expected, got, ok}...], "ok": all-pass}.
    """
    rng = np.random.default_rng(seed)
    stages = []

    def check(name: str, arr: np.ndarray, expected: tuple) -> np.ndarray:
        stages.append(
            {"stage": name, "expected": list(expected), "got": list(arr.shape), "ok": arr.shape == expected}
        )
        return arr

    v = rng.standard_normal(768)
    h = check("linear_768_to_1024", rng.standard_normal((1024, 768)) @ v, (1024,))
    img = check("reshape_1x32x32", h.reshape(1, 32, 32), (1, 32, 32))
    wc = rng.standard_normal((16, 1))
    img = check("channel_expand_16x32x32", np.einsum("oc,chw->ohw", wc, img), (16, 32, 32))
    img = check("subpixel_4x64x64", sub_pixel(img, 2), (4, 64, 64))
    wm = rng.standard_normal((4, 4))
    wl = rng.standard_normal((4, 4))
    check("mean_head_4x64x64", np.einsum("oc,chw->ohw", wm, img), (4, 64, 64))
    check("logvar_head_4x64x64", np.einsum("oc,chw->ohw", wl, img), (4, 64, 64))
    return {"stages": stages, "ok": all(s["ok"] for s in stages)}
