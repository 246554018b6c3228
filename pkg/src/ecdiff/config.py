"""Run configuration: one JSON file describing task, schedule, training,
guidance and evaluation. Flags may override single values; everything else
round-trips losslessly so a config can be hashed, logged and replayed.
"""

import hashlib
import json
from dataclasses import dataclass

import numpy as np

from .promptvae import VaeTrainConfig
from .sampling import GuidanceConfig
from .schedule import Schedule
from .tasks import EditTask, Prompt
from .training import TrainConfig


@dataclass(frozen=True)
class EvalConfig:
    n_eval: int = 512
    n_conditions: int = 4
    n_seeds: int = 5
    feature_dim: int = 8
    n_directions: int = 64
    truth_draws: int = 10_000
    mmd_draws: int = 2048
    bootstrap: int = 1000
    oracle_probes: int = 256

    def __post_init__(self):
        if self.n_eval % self.n_conditions != 0:
            raise ValueError("n_eval must be divisible by n_conditions")
        if self.n_eval // self.n_conditions < 100:
            raise ValueError("need >= 100 eval samples per condition")
        if self.n_seeds < 1:
            raise ValueError("need at least one benchmark seed")


@dataclass(frozen=True)
class RunConfig:
    seed: int
    out_dir: str
    task: EditTask
    schedule: Schedule
    embed_dim: int
    n_train: int
    prompt_vae: VaeTrainConfig
    train_implicit: TrainConfig
    train_explicit: TrainConfig
    guidance: tuple
    eval: EvalConfig

    def __post_init__(self):
        if self.train_implicit.mode != "implicit" or self.train_explicit.mode != "explicit":
            raise ValueError("train_implicit/train_explicit modes are fixed by their slot")
        if self.n_train < 1 or self.embed_dim < 1:
            raise ValueError("n_train and embed_dim must be >= 1")
        object.__setattr__(self, "guidance", tuple(self.guidance))


def task_to_dict(task: EditTask) -> dict:
    return {
        "context_weights": task.context_weights.tolist(),
        "context_means": task.context_means.tolist(),
        "context_covs": task.context_covs.tolist(),
        "prompts": [{"A": p.A.tolist(), "b": p.b.tolist()} for p in task.prompts],
        "edit_noise_std": task.edit_noise_std,
        "ctx_encoder_std": task.ctx_encoder_std,
    }


def task_from_dict(d: dict) -> EditTask:
    return EditTask(
        context_weights=np.asarray(d["context_weights"], dtype=np.float64),
        context_means=np.asarray(d["context_means"], dtype=np.float64),
        context_covs=np.asarray(d["context_covs"], dtype=np.float64),
        prompts=tuple(
            Prompt(i, np.asarray(p["A"], dtype=np.float64), np.asarray(p["b"], dtype=np.float64))
            for i, p in enumerate(d["prompts"])
        ),
        edit_noise_std=float(d["edit_noise_std"]),
        ctx_encoder_std=float(d["ctx_encoder_std"]),
    )


def config_to_dict(cfg: RunConfig) -> dict:
    sc = cfg.schedule
    sched = {"kind": sc.kind, "t_eps": sc.t_eps}
    if np.isfinite(sc.lambda_min):
        sched["lambda_min"] = sc.lambda_min
    if np.isfinite(sc.lambda_max):
        sched["lambda_max"] = sc.lambda_max
    return {
        "seed": cfg.seed,
        "out_dir": cfg.out_dir,
        "task": task_to_dict(cfg.task),
        "schedule": sched,
        "embed_dim": cfg.embed_dim,
        "n_train": cfg.n_train,
        "prompt_vae": vars(cfg.prompt_vae).copy(),
        "train_implicit": _train_to_dict(cfg.train_implicit),
        "train_explicit": _train_to_dict(cfg.train_explicit),
        "guidance": [
            {"mode": g.mode, "s_img": g.s_img, "s_prompt": g.s_prompt, "steps": g.steps, "seed": g.seed}
            for g in cfg.guidance
        ],
        "eval": vars(cfg.eval).copy(),
    }


def _train_to_dict(t: TrainConfig) -> dict:
    d = vars(t).copy()
    d["hidden"] = list(t.hidden)
    return d


def config_from_dict(d: dict) -> RunConfig:
    sch = d["schedule"]
    return RunConfig(
        seed=int(d["seed"]),
        out_dir=str(d["out_dir"]),
        task=task_from_dict(d["task"]),
        schedule=Schedule(
            kind=sch.get("kind", "cosine"),
            t_eps=float(sch.get("t_eps", 1e-3)),
            lambda_min=float(sch["lambda_min"]) if "lambda_min" in sch else float("nan"),
            lambda_max=float(sch["lambda_max"]) if "lambda_max" in sch else float("nan"),
        ),
        embed_dim=int(d["embed_dim"]),
        n_train=int(d["n_train"]),
        prompt_vae=VaeTrainConfig(**d["prompt_vae"]),
        train_implicit=TrainConfig(**{**d["train_implicit"], "hidden": tuple(d["train_implicit"]["hidden"])}),
        train_explicit=TrainConfig(**{**d["train_explicit"], "hidden": tuple(d["train_explicit"]["hidden"])}),
        guidance=tuple(GuidanceConfig(**g) for g in d["guidance"]),
        eval=EvalConfig(**d["eval"]),
    )


def load_config(path: str) -> RunConfig:
    with open(path) as f:
        return config_from_dict(json.load(f))


def config_json(cfg: RunConfig) -> str:
    """Canonical serialization: sorted keys, fixed indentation."""
    return json.dumps(config_to_dict(cfg), indent=2, sort_keys=True)


def save_config(cfg: RunConfig, path: str) -> None:
    with open(path, "w") as f:
        f.write(config_json(cfg) + "\n")


def config_hash(cfg: RunConfig) -> str:
    """Short stable digest identifying the exact configuration."""
    return hashlib.sha256(config_json(cfg).encode("utf-8")).hexdigest()[:12]
