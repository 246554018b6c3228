"""Synthetic editing tasks with analytically known conditionals.

A task is a Gaussian-mixture prior over context points plus a small set of
prompts, each an affine map (A, b) on context space. An edit triple is
(context c, prompt id p, target x) with

    x = A_p c + b_p + zeta,   zeta ~ N(0, edit_noise_std^2 I),

so every conditional p(x | c, p) is an isotropic Gaussian and exact score
oracles exist for the whole forward process.
"""

from dataclasses import dataclass, field

import numpy as np

from .endpoint import DiagGaussian


@dataclass(frozen=True)
class Prompt:
    """One edit operation: x = A c + b (+ noise)."""

    prompt_id: int
    A: np.ndarray
    b: np.ndarray

    def __post_init__(self):
        A = np.asarray(self.A, dtype=np.float64)
        b = np.asarray(self.b, dtype=np.float64)
        if A.ndim != 2 or A.shape[0] != A.shape[1] or b.shape != (A.shape[0],):
            raise ValueError(f"prompt {self.prompt_id}: bad shapes A{A.shape} b{b.shape}")
        if abs(np.linalg.det(A)) <= 1e-9:
            raise ValueError(f"prompt {self.prompt_id}: affine map is singular")
        object.__setattr__(self, "A", A)
        object.__setattr__(self, "b", b)


@dataclass(frozen=True)
class EditTask:
    context_weights: np.ndarray  # (M,) positive, sums to 1
    context_means: np.ndarray  # (M, d)
    context_covs: np.ndarray  # (M,) isotropic covariance scalars
    prompts: tuple  # tuple of Prompt
    edit_noise_std: float
    ctx_encoder_std: float = 0.05  # identity-encoder stand-in: N(c, s^2 I)

    def __post_init__(self):
        w = np.asarray(self.context_weights, dtype=np.float64)
        m = np.asarray(self.context_means, dtype=np.float64)
        c = np.asarray(self.context_covs, dtype=np.float64)
        if w.ndim != 1 or m.ndim != 2 or m.shape[0] != w.shape[0] or c.shape != w.shape:
            raise ValueError("inconsistent context mixture shapes")
        if np.any(w <= 0) or abs(w.sum() - 1.0) > 1e-9:
            raise ValueError("context weights must be positive and sum to 1")
        if np.any(c <= 0):
            raise ValueError("context covariances must be positive")
        if self.edit_noise_std <= 0:
            raise ValueError("edit_noise_std must be > 0")
        ids = [p.prompt_id for p in self.prompts]
        if ids != list(range(len(ids))):
            raise ValueError("prompt ids must be 0..K-1 in order")
        object.__setattr__(self, "context_weights", w)
        object.__setattr__(self, "context_means", m)
        object.__setattr__(self, "context_covs", c)
        object.__setattr__(self, "prompts", tuple(self.prompts))

    @property
    def dim(self) -> int:
        return self.context_means.shape[1]

    @property
    def n_prompts(self) -> int:
        return len(self.prompts)

    def prompt(self, prompt_id: int) -> Prompt:
        if not 0 <= prompt_id < len(self.prompts):
            raise ValueError(f"unknown prompt id {prompt_id}")
        return self.prompts[prompt_id]


@dataclass(frozen=True)
class EditTriple:
    context: np.ndarray
    prompt_id: int
    target: np.ndarray


def default_task() -> EditTask:
    """Default 2D task: 3 context modes x 4 prompts = 12 target modes.

    Prompts: shift right, shift up, rotate 90 degrees, shrink by half. All
    maps are scaled-orthogonal so the forward marginals stay isotropic.
    """
    prompts = (
        Prompt(0, np.eye(2), np.array([1.5, 0.0])),
        Prompt(1, np.eye(2), np.array([0.0, 1.5])),
        Prompt(2, np.array([[0.0, -1.0], [1.0, 0.0]]), np.zeros(2)),
        Prompt(3, 0.5 * np.eye(2), np.zeros(2)),
    )
    return EditTask(
        context_weights=np.full(3, 1.0 / 3.0),
        context_means=np.array([[-2.0, 0.0], [2.0, 0.0], [0.0, 2.0]]),
        context_covs=np.full(3, 0.15),
        prompts=prompts,
        edit_noise_std=0.1,
    )


def gen_dataset(task: EditTask, n: int, seed: int) -> list[EditTriple]:
    """Draw n edit triples; bitwise deterministic in seed."""
    if n < 1:
        raise ValueError(f"need n >= 1, got {n}")
    ctx, pid, tgt = gen_arrays(task, n, np.random.default_rng(seed))
    return [EditTriple(ctx[i], int(pid[i]), tgt[i]) for i in range(n)]


def gen_arrays(task: EditTask, n: int, rng: np.random.Generator):
    """Array-form generator used by the training loop: (ctx, pid, tgt)."""
    d = task.dim
    comp = rng.choice(task.context_weights.shape[0], size=n, p=task.context_weights)
    ctx = task.context_means[comp] + np.sqrt(task.context_covs[comp])[:, None] * rng.standard_normal((n, d))
    pid = rng.integers(0, task.n_prompts, size=n)
    tgt = np.empty((n, d))
    for k, p in enumerate(task.prompts):
        mask = pid == k
        tgt[mask] = ctx[mask] @ p.A.T + p.b
    tgt += task.edit_noise_std * rng.standard_normal((n, d))
    return ctx, pid, tgt


def true_conditional(task: EditTask, context, prompt_id: int) -> DiagGaussian:
    """Exact conditional p(x | c, p) = N(A_p c + b_p, edit_noise_std^2 I)."""
    p = task.prompt(prompt_id)
    context = np.asarray(context, dtype=np.float64)
    return DiagGaussian(p.A @ context + p.b, np.full(task.dim, task.edit_noise_std**2))


def noiseless_edit(task: EditTask, context, prompt_id: int) -> np.ndarray:
    """The deterministic edit A_p c + b_p (pseudo-ground-truth target)."""
    p = task.prompt(prompt_id)
    return p.A @ np.asarray(context, dtype=np.float64) + p.b


def context_gaussian(task: EditTask, context) -> DiagGaussian:
    """Context contribution to the explicit endpoint: N(c, s_ctx^2 I)."""
    context = np.asarray(context, dtype=np.float64)
    return DiagGaussian(context, np.full(task.dim, task.ctx_encoder_std**2))


def isotropy_scale(p: Prompt) -> float:
    """Return gamma with A A^T = gamma I, or raise if A is not conformal.

    The mixture oracles need isotropic pushforwards; shifts, rotations and
    uniform scalings all qualify.
    """
    aat = p.A @ p.A.T
    gamma = float(np.trace(aat)) / aat.shape[0]
    if not np.allclose(aat, gamma * np.eye(aat.shape[0]), atol=1e-9):
        raise ValueError(
            f"prompt {p.prompt_id}: A A^T is not isotropic; closed-form mixture "
            "marginals are unavailable for this map"
        )
    return gamma
