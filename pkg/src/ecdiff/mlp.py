"""Minimal MLP with explicit reverse-mode gradients.

Parameters are immutable snapshots (functional style): forward records a
tape of intermediates, backward consumes it, and the optimizer returns new
parameter snapshots. Inputs may be a single vector (d,) or a batch (n, d);
all arithmetic is float64 numpy.

Layer structure (L layers):

    h_0 = input
    for i in 0..L-1:
        g_i  = standardize(h_i)  if norm and i > 0 else h_i
        pre_i = W_i g_i + b_i
        h_{i+1} = act(pre_i)     if i < L-1 else pre_i

standardize() is per-sample: subtract the feature mean, divide by the
feature std (the instance-norm analog for vectors). The raw input and the
final output are never normalized or activated.
"""

from dataclasses import dataclass

import numpy as np

LEAKY_SLOPE = 0.01
NORM_EPS = 1e-5
ADAM_BETA1 = 0.9
ADAM_BETA2 = 0.999
ADAM_EPS = 1e-8


@dataclass(frozen=True)
class MlpParams:
    layers: tuple  # tuple of (W: (out, in), b: (out,)) float64 arrays
    activation: str = "leaky_relu"  # "leaky_relu" | "identity"
    norm: tuple = False  # per-layer standardize-before-affine flags; bool = shorthand

    def __post_init__(self):
        if self.activation not in ("leaky_relu", "identity"):
            raise ValueError(f"unknown activation {self.activation!r}")
        if isinstance(self.norm, bool):
            # True standardizes every hidden affine's input, never the raw input
            flags = tuple(self.norm and i > 0 for i in range(len(self.layers)))
        else:
            flags = tuple(bool(f) for f in self.norm)
        if len(flags) != len(self.layers):
            raise ValueError(f"{len(flags)} norm flags for {len(self.layers)} layers")
        object.__setattr__(self, "norm", flags)
        for i, (w, b) in enumerate(self.layers):
            if w.ndim != 2 or b.ndim != 1 or w.shape[0] != b.shape[0]:
                raise ValueError(f"layer {i}: inconsistent shapes {w.shape}, {b.shape}")
            if i > 0 and w.shape[1] != self.layers[i - 1][0].shape[0]:
                raise ValueError(f"layer {i}: input dim {w.shape[1]} does not match previous layer")
            if not (np.isfinite(w).all() and np.isfinite(b).all()):
                raise ValueError(f"layer {i}: non-finite parameters")

    @property
    def in_dim(self) -> int:
        return self.layers[0][0].shape[1]

    @property
    def out_dim(self) -> int:
        return self.layers[-1][0].shape[0]


@dataclass
class ForwardTape:
    """Intermediates recorded by forward, sufficient for backward."""

    params: MlpParams
    x: np.ndarray  # raw input as passed (pre-batching)
    inputs: list  # h_i: input to each layer, batched (n, d_i)
    normed: list  # g_i: standardized layer inputs (== inputs[i] when no norm)
    stds: list  # per-sample std used by standardize (None when no norm)
    pres: list  # pre-activations
    output: np.ndarray  # final output, same leading shape as x


def _act(z: np.ndarray, kind: str) -> np.ndarray:
    if kind == "identity":
        return z
    return np.where(z >= 0.0, z, LEAKY_SLOPE * z)


def _act_grad(z: np.ndarray, kind: str) -> np.ndarray:
    if kind == "identity":
        return np.ones_like(z)
    return np.where(z >= 0.0, 1.0, LEAKY_SLOPE)


def _standardize(h: np.ndarray):
    mu = h.mean(axis=1, keepdims=True)
    sd = np.sqrt(h.var(axis=1, keepdims=True) + NORM_EPS)
    return (h - mu) / sd, sd


def forward(p: MlpParams, x) -> tuple[np.ndarray, ForwardTape]:
    """Evaluate the network, returning (output, tape).

    x: (in_dim,) or (n, in_dim). Output has the matching leading shape.
    """
    x = np.asarray(x, dtype=np.float64)
    if not np.isfinite(x).all():
        raise ValueError("non-finite network input")
    single = x.ndim == 1
    h = x[None, :] if single else x
    if h.shape[1] != p.in_dim:
        raise ValueError(f"input dim {h.shape[1]} does not match first layer ({p.in_dim})")

    inputs, normed, stds, pres = [], [], [], []
    n_layers = len(p.layers)
    for i, (w, b) in enumerate(p.layers):
        inputs.append(h)
        if p.norm[i]:
            g, sd = _standardize(h)
        else:
            g, sd = h, None
        normed.append(g)
        stds.append(sd)
        pre = g @ w.T + b
        pres.append(pre)
        h = _act(pre, p.activation) if i < n_layers - 1 else pre
    out = h[0] if single else h
    return out, ForwardTape(p, x, inputs, normed, stds, pres, out)


def backward(p: MlpParams, tape: ForwardTape, output_grad):
    """Gradients of <output_grad, output> w.r.t. parameters and input.

    Returns (param_grads, input_grad) where param_grads is a list of
    (dW, db) matching p.layers. For batched tapes the scalar is the sum
    over batch elements; scale output_grad by 1/n for a batch mean.
    """
    if tape.params is not p:
        raise ValueError("tape was not produced by forward() on these parameters")
    output_grad = np.asarray(output_grad, dtype=np.float64)
    single = output_grad.ndim == 1
    g = output_grad[None, :] if single else output_grad
    if g.shape != tape.pres[-1].shape:
        raise ValueError(f"output_grad shape {g.shape} does not match output {tape.pres[-1].shape}")

    n_layers = len(p.layers)
    param_grads = [None] * n_layers
    for i in range(n_layers - 1, -1, -1):
        w, _ = p.layers[i]
        d_pre = g if i == n_layers - 1 else g * _act_grad(tape.pres[i], p.activation)
        dw = d_pre.T @ tape.normed[i]
        db = d_pre.sum(axis=0)
        param_grads[i] = (dw, db)
        g = d_pre @ w
        if tape.stds[i] is not None:
            # standardize backward: dx = (g - mean(g) - y * mean(g*y)) / sd
            y = tape.normed[i]
            g = (g - g.mean(axis=1, keepdims=True) - y * (g * y).mean(axis=1, keepdims=True)) / tape.stds[i]
    input_grad = g[0] if single else g
    return param_grads, input_grad


def init_mlp(sizes, activation="leaky_relu", norm=False, rng=None, final_scale=1.0) -> MlpParams:
    """He-initialized MLP with the given layer sizes [in, h1, ..., out].

    final_scale shrinks the last layer's weights (near-zero heads are a
    common trick for regression outputs that should start small).
    """
    rng = np.random.default_rng(rng)
    layers = []
    for i in range(len(sizes) - 1):
        fan_in, fan_out = sizes[i], sizes[i + 1]
        scale = np.sqrt(2.0 / fan_in)
        if i == len(sizes) - 2:
            scale *= final_scale
        w = rng.normal(0.0, scale, size=(fan_out, fan_in))
        layers.append((w, np.zeros(fan_out)))
    return MlpParams(tuple(layers), activation=activation, norm=norm)


# ---------------------------------------------------------------------------
# Adam
# ---------------------------------------------------------------------------


@dataclass
class AdamState:
    """First/second moment accumulators over a flat list of arrays."""

    m: list
    v: list
    step: int = 0

    @classmethod
    def for_arrays(cls, arrays) -> "AdamState":
        return cls([np.zeros_like(a) for a in arrays], [np.zeros_like(a) for a in arrays])


def adam_step(values, grads, lr: float, state: AdamState):
    """One Adam update over a flat list of arrays; returns new arrays.

    State is updated in place (it is training-loop-local); the input arrays
    are left untouched.
    """
    if len(values) != len(grads) or len(values) != len(state.m):
        raise ValueError("adam_step: mismatched value/grad/state lengths")
    for g in grads:
        if not np.isfinite(g).all():
            raise FloatingPointError("non-finite gradient in optimizer step")
    state.step += 1
    t = state.step
    bias1 = 1.0 - ADAM_BETA1**t
    bias2 = 1.0 - ADAM_BETA2**t
    out = []
    for k, (val, g) in enumerate(zip(values, grads)):
        state.m[k] = ADAM_BETA1 * state.m[k] + (1.0 - ADAM_BETA1) * g
        state.v[k] = ADAM_BETA2 * state.v[k] + (1.0 - ADAM_BETA2) * g * g
        m_hat = state.m[k] / bias1
        v_hat = state.v[k] / bias2
        out.append(val - lr * m_hat / (np.sqrt(v_hat) + ADAM_EPS))
    return out


def mlp_arrays(p: MlpParams) -> list:
    """Flatten parameters as [W0, b0, W1, b1, ...] for the optimizer."""
    flat = []
    for w, b in p.layers:
        flat.extend([w, b])
    return flat


def mlp_from_arrays(p: MlpParams, arrays) -> MlpParams:
    layers = tuple((arrays[2 * i], arrays[2 * i + 1]) for i in range(len(p.layers)))
    return MlpParams(layers, activation=p.activation, norm=p.norm)


def sgd_step(p: MlpParams, grads, lr: float, adam_state: AdamState) -> MlpParams:
    """Adam update (beta1=0.9, beta2=0.999, eps=1e-8) returning new params.

    grads: list of (dW, db) as produced by backward().
    """
    flat_grads = []
    for dw, db in grads:
        flat_grads.extend([dw, db])
    return mlp_from_arrays(p, adam_step(mlp_arrays(p), flat_grads, lr, adam_state))


# ---------------------------------------------------------------------------
# Checkpoint (de)serialization: explicit shapes, row-major weight data
# ---------------------------------------------------------------------------


def mlp_to_dict(p: MlpParams) -> dict:
    return {
        "activation": p.activation,
        "norm": list(p.norm),
        "layers": [
            {"shape": list(w.shape), "w": w.ravel(order="C").tolist(), "b": b.tolist()}
            for w, b in p.layers
        ],
    }


def mlp_from_dict(d: dict) -> MlpParams:
    layers = tuple(
        (
            np.asarray(entry["w"], dtype=np.float64).reshape(entry["shape"], order="C"),
            np.asarray(entry["b"], dtype=np.float64),
        )
        for entry in d["layers"]
    )
    return MlpParams(layers, activation=d["activation"], norm=d["norm"])
