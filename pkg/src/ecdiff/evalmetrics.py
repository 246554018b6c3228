"""Directional similarity metrics, distances to ground truth, and the
benchmark harness comparing explicit conditioning against CFG.

Feature space is a fixed seeded isometry of data space (plus fixed caption
vectors), a stand-in for frozen pretrained encoders: DVS compares the
generated edit direction with the true edit direction, DCS compares it with
the caption-change direction.
"""

import time
from dataclasses import dataclass

import numpy as np
from scipy.spatial.distance import cdist, pdist
from scipy.stats import wasserstein_distance

from .denoiser import Denoiser, denoise
from .endpoint import DiagGaussian, fuse
from .oracle import GaussianMixture, implied_score, marginal_at_t, score
from .promptvae import PromptVae, encode_prompt
from .sampling import GuidanceConfig, ddim_sample
from .schedule import Schedule, alpha_sigma, log_snr
from .tasks import EditTask, context_gaussian, noiseless_edit, true_conditional

DEGENERATE_NORM = 1e-9
METRIC_NAMES = ("dcs", "dvs", "w1_sliced", "mmd", "denoiser_calls", "wall_time_us")


@dataclass(frozen=True)
class FeatureMaps:
    """Frozen feature maps: E_V embeds points, E_T embeds caption ids.

    E_V is (d, F) with orthonormal rows (an isometry, so feature-space
    cosines mean what data-space cosines mean). E_T is (K+1, F) of unit
    vectors; the last row is the reserved "no edit" caption.
    """

    E_V: np.ndarray
    E_T: np.ndarray

    def __post_init__(self):
        ev, et = np.asarray(self.E_V, np.float64), np.asarray(self.E_T, np.float64)
        if ev.ndim != 2 or et.ndim != 2 or ev.shape[1] != et.shape[1]:
            raise ValueError("E_V and E_T must share the feature dimension")
        if not np.allclose(ev @ ev.T, np.eye(ev.shape[0]), atol=1e-9):
            raise ValueError("E_V rows must be orthonormal")
        if not np.allclose(np.linalg.norm(et, axis=1), 1.0, atol=1e-9):
            raise ValueError("E_T rows must be unit norm")
        object.__setattr__(self, "E_V", ev)
        object.__setattr__(self, "E_T", et)

    @property
    def feature_dim(self) -> int:
        return self.E_V.shape[1]

    @property
    def no_edit_id(self) -> int:
        return self.E_T.shape[0] - 1


def feature_maps(data_dim: int, n_prompts: int, feature_dim: int = 8, seed: int = 0) -> FeatureMaps:
    if feature_dim < data_dim:
        raise ValueError("feature dim must be >= data dim for an isometry")
    rng = np.random.default_rng(seed)
    q, _ = np.linalg.qr(rng.standard_normal((feature_dim, data_dim)))
    et = rng.standard_normal((n_prompts + 1, feature_dim))
    et /= np.linalg.norm(et, axis=1, keepdims=True)
    return FeatureMaps(q.T, et)


def visual_features(fm: FeatureMaps, x) -> np.ndarray:
    return np.asarray(x, dtype=np.float64) @ fm.E_V


def _cosine(u: np.ndarray, v: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Row-wise cosine with degenerate handling: tiny norms give (0, flagged)."""
    u, v = np.atleast_2d(u), np.atleast_2d(v)
    nu = np.linalg.norm(u, axis=1)
    nv = np.linalg.norm(v, axis=1)
    degen = (nu < DEGENERATE_NORM) | (nv < DEGENERATE_NORM)
    denom = np.where(degen, 1.0, nu * nv)
    val = np.where(degen, 0.0, np.sum(u * v, axis=1) / denom)
    return val, degen


def dcs(fm: FeatureMaps, i, o, c_i: int, c_e: int) -> tuple[float, bool]:
    """Caption-direction similarity of the edit i -> o.

    c_i is the unchanged-caption id, c_e the applied edit's caption id.
    Returns (value, degenerate_flag); degenerate pairs score 0.
    """
    if c_i == c_e:
        raise ValueError("dcs requires distinct caption ids (an edit must change the caption)")
    dv = visual_features(fm, i) - visual_features(fm, o)
    dt = fm.E_T[c_i] - fm.E_T[c_e]
    val, degen = _cosine(dv, dt)
    return float(val[0]), bool(degen[0])


def dvs(fm: FeatureMaps, i, o, e) -> tuple[float, bool]:
    """Visual-direction similarity: generated edit vs true edit, both from i."""
    fi = visual_features(fm, i)
    val, degen = _cosine(fi - visual_features(fm, o), fi - visual_features(fm, e))
    return float(val[0]), bool(degen[0])


def _draw_truth(truth, n: int, rng) -> np.ndarray:
    if isinstance(truth, DiagGaussian):
        return truth.mean + np.sqrt(truth.var) * rng.standard_normal((n, truth.dim))
    if isinstance(truth, GaussianMixture):
        comp = rng.choice(truth.weights.shape[0], size=n, p=truth.weights)
        return truth.means[comp] + np.sqrt(truth.vars[comp]) * rng.standard_normal((n, truth.dim))
    raise TypeError(f"unsupported truth distribution {type(truth).__name__}")


def dist_to_truth(
    samples,
    truth,
    seed: int,
    n_directions: int = 64,
    truth_draws: int = 10_000,
    mmd_draws: int = 2048,
) -> tuple[float, float]:
    """(sliced W1, RBF-MMD) between samples and a reference distribution.

    W1 projects onto fixed seeded unit directions and takes exact 1D
    distances against a large seeded truth sample. MMD uses the median
    pairwise distance as bandwidth (fewer truth draws: the kernel matrix
    is quadratic in size).
    """
    x = np.asarray(samples, dtype=np.float64)
    if x.ndim != 2 or x.shape[0] < 100:
        raise ValueError(f"need at least 100 samples, got {0 if x.ndim != 2 else x.shape[0]}")
    rng = np.random.default_rng(seed)
    dirs = rng.standard_normal((n_directions, x.shape[1]))
    dirs /= np.linalg.norm(dirs, axis=1, keepdims=True)
    y = _draw_truth(truth, truth_draws, rng)

    xp, yp = x @ dirs.T, y @ dirs.T  # (n, n_directions)
    w1 = float(np.mean([wasserstein_distance(xp[:, j], yp[:, j]) for j in range(n_directions)]))

    ym = _draw_truth(truth, mmd_draws, rng)
    both = np.concatenate([x, ym])
    h = float(np.median(pdist(both)))
    if h < DEGENERATE_NORM:
        return w1, 0.0  # all points coincide; identical distributions
    kxx = np.exp(-cdist(x, x, "sqeuclidean") / (2.0 * h * h))
    kyy = np.exp(-cdist(ym, ym, "sqeuclidean") / (2.0 * h * h))
    kxy = np.exp(-cdist(x, ym, "sqeuclidean") / (2.0 * h * h))
    mmd2 = kxx.mean() + kyy.mean() - 2.0 * kxy.mean()
    return w1, float(np.sqrt(max(mmd2, 0.0)))


@dataclass(frozen=True)
class EvalRow:
    run_id: str
    method: str
    passes: int
    metric_name: str
    value: float
    seed: int

    def __post_init__(self):
        if self.passes not in (1, 2, 3):
            raise ValueError(f"passes must be 1, 2 or 3, got {self.passes}")
        if self.metric_name not in METRIC_NAMES:
            raise ValueError(f"unknown metric {self.metric_name!r}")


def method_name(g: GuidanceConfig) -> str:
    return ("ec" if g.mode == "explicit" else "cfg") + f"_x{g.passes}"


def oracle_agreement(
    den: Denoiser,
    task: EditTask,
    sched: Schedule,
    embeddings: np.ndarray,
    t: float,
    n_probe: int = 256,
    seed: int = 0,
) -> float:
    """Mean cosine between the model-implied score and the analytic score.

    Probes are drawn from the true conditional forward marginal at t, with
    fresh (context, prompt) conditions per probe. Implicit models only (the
    oracle marginals assume the standard endpoint).
    """
    if den.cfg.mode != "implicit":
        raise ValueError("oracle agreement is defined for the implicit regime")
    rng = np.random.default_rng(seed)
    d = task.dim
    comp = rng.choice(task.context_weights.shape[0], size=n_probe, p=task.context_weights)
    ctx = task.context_means[comp] + np.sqrt(task.context_covs[comp])[:, None] * rng.standard_normal((n_probe, d))
    pid = rng.integers(0, task.n_prompts, size=n_probe)
    x = np.stack([true_conditional(task, ctx[i], int(pid[i])).mean for i in range(n_probe)])
    x += task.edit_noise_std * rng.standard_normal((n_probe, d))
    a, s = alpha_sigma(sched, t)
    z = a * x + s * rng.standard_normal((n_probe, d))

    v_hat = denoise(den, z, log_snr(sched, t), ctx, embeddings[pid])
    model_score = implied_score(sched, t, z, v_hat)
    truth = np.stack(
        [
            score(marginal_at_t(task, sched, t, context=ctx[i], prompt_id=int(pid[i])), z[i])
            for i in range(n_probe)
        ]
    )
    val, degen = _cosine(model_score, truth)
    return float(np.mean(np.where(degen, 0.0, val)))


@dataclass
class BenchmarkResult:
    rows: list  # deterministic EvalRows (dcs, dvs, w1_sliced, mmd, denoiser_calls)
    timing_rows: list  # wall_time_us EvalRows (not reproducible bit-for-bit)
    samples: dict  # method -> (n_eval, d) final samples
    contexts: np.ndarray  # (n_cond, d) held-out contexts
    prompt_ids: np.ndarray  # (n_cond,)
    cond_index: np.ndarray  # (n_eval,) which condition produced each sample


def run_benchmark(
    models: dict,
    task: EditTask,
    fm: FeatureMaps,
    configs: list,
    n_eval: int,
    seed: int,
    sched: Schedule,
    vae: PromptVae,
    embeddings: np.ndarray,
    run_id: str = "bench",
    n_conditions: int = 4,
) -> BenchmarkResult:
    """Evaluate every guidance config on shared held-out conditions.

    models: {"implicit": Denoiser, "explicit": Denoiser}. Each config draws
    n_eval samples split over n_conditions (context, prompt) pairs, then
    reports mean dcs/dvs, mean per-condition distances to true_conditional,
    and the pass accounting. Deterministic given seed, except wall time,
    which is kept in separate rows.
    """
    if n_eval // n_conditions < 100:
        raise ValueError("need >= 100 samples per condition for dist_to_truth")
    ss = np.random.SeedSequence(seed)
    cond_ss, *cfg_ss = ss.spawn(1 + len(configs))
    rng = np.random.default_rng(cond_ss)
    d = task.dim
    comp = rng.choice(task.context_weights.shape[0], size=n_conditions, p=task.context_weights)
    contexts = task.context_means[comp] + np.sqrt(task.context_covs[comp])[:, None] * rng.standard_normal(
        (n_conditions, d)
    )
    prompt_ids = np.arange(n_conditions) % task.n_prompts
    per_cond = n_eval // n_conditions

    rows, timing_rows, samples = [], [], {}
    cond_index = np.repeat(np.arange(n_conditions), per_cond)
    for g_i, g in enumerate(configs):
        key = "explicit" if g.mode == "explicit" else "implicit"
        if key not in models or models[key] is None:
            raise ValueError(f"no trained {key} model available for config {method_name(g)}")
        den = models[key]
        g_rng = np.random.default_rng(cfg_ss[g_i])
        finals = np.empty((n_conditions * per_cond, d))
        dcs_vals = np.empty(n_conditions * per_cond)
        dvs_vals = np.empty(n_conditions * per_cond)
        w1s, mmds = [], []
        wall = 0.0
        for j in range(n_conditions):
            c, p = contexts[j], int(prompt_ids[j])
            pemb = embeddings[p]
            if g.mode == "explicit":
                ep = fuse(context_gaussian(task, c), encode_prompt(vae, pemb))
                start = ep.mean + np.sqrt(ep.var) * g_rng.standard_normal((per_cond, d))
                cond = (None, pemb if den.cfg.uses_prompt_input else None)
            else:
                start = g_rng.standard_normal((per_cond, d))
                cond = (c, pemb)
            t0 = time.perf_counter()
            res = ddim_sample(den, sched, start, cond, g)
            wall += (time.perf_counter() - t0) * 1e6
            out = res.final
            sl = slice(j * per_cond, (j + 1) * per_cond)
            finals[sl] = out

            fi = visual_features(fm, c)
            dv_gen = fi - visual_features(fm, out)
            dvs_vals[sl] = _cosine(dv_gen, np.broadcast_to(fi - visual_features(fm, noiseless_edit(task, c, p)), dv_gen.shape))[0]
            dt = fm.E_T[fm.no_edit_id] - fm.E_T[p]
            dcs_vals[sl] = _cosine(dv_gen, np.broadcast_to(dt, dv_gen.shape))[0]
            w1, mmd = dist_to_truth(out, true_conditional(task, c, p), seed=int(cfg_ss[g_i].generate_state(1)[0]) + j)
            w1s.append(w1)
            mmds.append(mmd)

        name = method_name(g)
        samples[name] = finals
        for metric, value in (
            ("dcs", float(dcs_vals.mean())),
            ("dvs", float(dvs_vals.mean())),
            ("w1_sliced", float(np.mean(w1s))),
            ("mmd", float(np.mean(mmds))),
            ("denoiser_calls", float(g.passes * g.steps)),
        ):
            rows.append(EvalRow(run_id, name, g.passes, metric, value, seed))
        timing_rows.append(EvalRow(run_id, name, g.passes, "wall_time_us", wall / finals.shape[0], seed))
    return BenchmarkResult(rows, timing_rows, samples, contexts, prompt_ids, cond_index)


def bootstrap_summary(rows: list, n_boot: int = 1000, seed: int = 0) -> dict:
    """Per-(method, metric) mean and 95% bootstrap interval over row values.

    Rows are typically one value per benchmark seed; the bootstrap resamples
    those values with replacement.
    """
    rng = np.random.default_rng(seed)
    grouped: dict = {}
    for r in rows:
        grouped.setdefault(r.method, {}).setdefault(r.metric_name, []).append(r.value)
    out: dict = {}
    for method in sorted(grouped):
        out[method] = {}
        for metric in sorted(grouped[method]):
            vals = np.asarray(grouped[method][metric])
            means = rng.choice(vals, size=(n_boot, vals.shape[0]), replace=True).mean(axis=1)
            out[method][metric] = {
                "mean": float(vals.mean()),
                "ci95": [float(np.percentile(means, 2.5)), float(np.percentile(means, 97.5))],
                "n": int(vals.shape[0]),
            }
    return out
