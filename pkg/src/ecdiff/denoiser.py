"""v-prediction denoiser: a conditioned MLP plus learned null-condition slots.

The implicit variant concatenates (z, lambda-features, context, prompt
embedding) and supports substituting learned null vectors for either
condition (the branches classifier-free guidance needs). The explicit
variant sees only (z, lambda-features[, prompt embedding]): its conditioning
arrives through the endpoint the trajectory was diffused toward.
"""

from dataclasses import dataclass, field

import numpy as np

from .mlp import MlpParams, forward, init_mlp, mlp_from_dict, mlp_to_dict

LAMBDA_FREQS = (1.0 / 16.0, 1.0 / 8.0, 1.0 / 4.0, 1.0 / 2.0)
LAMBDA_DIM = 2 * len(LAMBDA_FREQS)


def lambda_embedding(lam) -> np.ndarray:
    """8-dim sinusoidal features of the log-SNR: (sin, cos) at 4 frequencies.

    lam: scalar or (n,). Returns (8,) or (n, 8).
    """
    lam = np.asarray(lam, dtype=np.float64)
    phases = lam[..., None] * np.asarray(LAMBDA_FREQS)
    out = np.stack([np.sin(phases), np.cos(phases)], axis=-1)  # (..., 4, 2)
    return out.reshape(*lam.shape, LAMBDA_DIM)


@dataclass(frozen=True)
class DenoiserConfig:
    mode: str  # "implicit" | "explicit"
    data_dim: int = 2
    embed_dim: int = 16
    hidden: tuple = (64, 64)
    extra_tokens: bool = True  # explicit only: feed the prompt embedding as input too

    def __post_init__(self):
        if self.mode not in ("implicit", "explicit"):
            raise ValueError(f"unknown mode {self.mode!r}")
        if self.data_dim < 1 or self.embed_dim < 1 or len(self.hidden) < 1:
            raise ValueError("bad denoiser dimensions")
        object.__setattr__(self, "hidden", tuple(int(h) for h in self.hidden))

    @property
    def uses_prompt_input(self) -> bool:
        return self.mode == "implicit" or self.extra_tokens

    @property
    def in_dim(self) -> int:
        n = self.data_dim + LAMBDA_DIM
        if self.mode == "implicit":
            n += self.data_dim  # context slot
        if self.uses_prompt_input:
            n += self.embed_dim
        return n


@dataclass(frozen=True)
class Denoiser:
    cfg: DenoiserConfig
    net: MlpParams
    null_ctx: np.ndarray | None = None  # learned constants, implicit mode only
    null_prompt: np.ndarray | None = None

    def __post_init__(self):
        if self.net.in_dim != self.cfg.in_dim or self.net.out_dim != self.cfg.data_dim:
            raise ValueError("network shape does not match the denoiser config")
        if self.cfg.mode == "implicit":
            if self.null_ctx is None or self.null_prompt is None:
                raise ValueError("implicit denoiser requires null condition vectors")
            if self.null_ctx.shape != (self.cfg.data_dim,):
                raise ValueError("null_ctx must live in data space")
            if self.null_prompt.shape != (self.cfg.embed_dim,):
                raise ValueError("null_prompt must live in embedding space")


def init_denoiser(cfg: DenoiserConfig, rng) -> Denoiser:
    rng = np.random.default_rng(rng)
    net = init_mlp((cfg.in_dim, *cfg.hidden, cfg.data_dim), norm=True, rng=rng, final_scale=0.1)
    if cfg.mode == "implicit":
        # learned constants, started small but nonzero so "null" != zero context
        return Denoiser(cfg, net, 0.1 * rng.standard_normal(cfg.data_dim), 0.1 * rng.standard_normal(cfg.embed_dim))
    return Denoiser(cfg, net)


def denoiser_input(den: Denoiser, z: np.ndarray, lam: np.ndarray, ctx, pemb) -> np.ndarray:
    """Assemble the (n, in_dim) network input.

    ctx/pemb may be None (meaning: the learned null vector, implicit mode),
    a single vector broadcast over the batch, or per-row (n, .) arrays.
    """
    cfg = den.cfg
    n = z.shape[0]
    cols = [z, lambda_embedding(lam)]
    if cfg.mode == "implicit":
        c = den.null_ctx if ctx is None else np.asarray(ctx, dtype=np.float64)
        cols.append(np.broadcast_to(c, (n, cfg.data_dim)))
    elif ctx is not None:
        raise ValueError("explicit denoiser takes no context input")
    if cfg.uses_prompt_input:
        p = den.null_prompt if pemb is None else np.asarray(pemb, dtype=np.float64)
        if p is None:
            raise ValueError("this denoiser requires a prompt embedding")
        cols.append(np.broadcast_to(p, (n, cfg.embed_dim)))
    elif pemb is not None:
        raise ValueError("explicit denoiser without extra tokens takes no prompt input")
    return np.concatenate(cols, axis=1)


def denoise(den: Denoiser, z, lam, ctx=None, pemb=None) -> np.ndarray:
    """Predict v for a batch (n, d) or a single point (d,)."""
    z = np.asarray(z, dtype=np.float64)
    single = z.ndim == 1
    zb = z[None, :] if single else z
    lamb = np.broadcast_to(np.asarray(lam, dtype=np.float64), (zb.shape[0],))
    out, _ = forward(den.net, denoiser_input(den, zb, lamb, ctx, pemb))
    return out[0] if single else out


def denoiser_to_dict(den: Denoiser) -> dict:
    return {
        "mode": den.cfg.mode,
        "data_dim": den.cfg.data_dim,
        "embed_dim": den.cfg.embed_dim,
        "hidden": list(den.cfg.hidden),
        "extra_tokens": den.cfg.extra_tokens,
        "net": mlp_to_dict(den.net),
        "null_ctx": None if den.null_ctx is None else den.null_ctx.tolist(),
        "null_prompt": None if den.null_prompt is None else den.null_prompt.tolist(),
    }


def denoiser_from_dict(d: dict) -> Denoiser:
    cfg = DenoiserConfig(
        mode=d["mode"],
        data_dim=int(d["data_dim"]),
        embed_dim=int(d["embed_dim"]),
        hidden=tuple(d["hidden"]),
        extra_tokens=bool(d["extra_tokens"]),
    )
    null_ctx = None if d["null_ctx"] is None else np.asarray(d["null_ctx"], dtype=np.float64)
    null_prompt = None if d["null_prompt"] is None else np.asarray(d["null_prompt"], dtype=np.float64)
    return Denoiser(cfg, mlp_from_dict(d["net"]), null_ctx, null_prompt)
