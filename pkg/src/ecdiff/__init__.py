"""Desk-scale conditional diffusion lab.

Two ways to condition a 2D editing model, trained and benchmarked side by
side against closed-form score oracles:

- implicit: conditioning enters the denoiser as extra inputs; sampling uses
  classifier-free guidance with separate image and prompt scales.
- explicit: conditioning moves into the diffusion endpoint, a Gaussian fused
  from a context encoder and a prompt VAE; one denoiser pass per step.

Everything is numpy/scipy, deterministic under named seed substreams, and
small enough that every quantity of interest has an exact reference.
"""

from .schedule import Schedule, alpha_sigma, coeffs_weights, log_snr, loss_weight, t_of_log_snr
from .endpoint import DiagGaussian, EndpointSample, forward_point, fuse, sample_endpoint, standard_endpoint
from .mlp import AdamState, MlpParams, adam_step, backward, forward, init_mlp, sgd_step
from .tasks import (
    EditTask,
    EditTriple,
    Prompt,
    context_gaussian,
    default_task,
    gen_dataset,
    isotropy_scale,
    noiseless_edit,
    true_conditional,
)
from .oracle import (
    GaussianMixture,
    gamma_score,
    guided_score,
    implicit_classifier,
    implied_score,
    log_density,
    marginal_at_t,
    mollifier,
    mollifier_grad_sup,
    score,
)
from .promptvae import (
    PromptVae,
    VaeTrainConfig,
    encode_prompt,
    prompt_embeddings,
    shape_check_image_mode,
    sub_pixel,
    train_prompt_vae,
)
from .denoiser import Denoiser, DenoiserConfig, denoise, init_denoiser, lambda_embedding
from .training import TrainConfig, TrainingDiverged, recover_noise, recover_x, train_diffusion, training_loss, v_target
from .sampling import GuidanceConfig, SampleResult, SamplingDiverged, cfg_combine, ddim_sample, eval_times, gamma_combine
from .evalmetrics import (
    EvalRow,
    FeatureMaps,
    bootstrap_summary,
    dcs,
    dist_to_truth,
    dvs,
    feature_maps,
    method_name,
    oracle_agreement,
    run_benchmark,
)
from .config import EvalConfig, RunConfig, config_hash, load_config, save_config
from .seeding import substream, substream_seed

__version__ = "0.1.0"

__all__ = [
    "Schedule", "alpha_sigma", "coeffs_weights", "log_snr", "loss_weight", "t_of_log_snr",
    "DiagGaussian", "EndpointSample", "forward_point", "fuse", "sample_endpoint", "standard_endpoint",
    "AdamState", "MlpParams", "adam_step", "backward", "forward", "init_mlp", "sgd_step",
    "EditTask", "EditTriple", "Prompt", "context_gaussian", "default_task", "gen_dataset",
    "isotropy_scale", "noiseless_edit", "true_conditional",
    "GaussianMixture", "gamma_score", "guided_score", "implicit_classifier", "implied_score",
    "log_density", "marginal_at_t", "mollifier", "mollifier_grad_sup", "score",
    "PromptVae", "VaeTrainConfig", "encode_prompt", "prompt_embeddings", "shape_check_image_mode",
    "sub_pixel", "train_prompt_vae",
    "Denoiser", "DenoiserConfig", "denoise", "init_denoiser", "lambda_embedding",
    "TrainConfig", "TrainingDiverged", "recover_noise", "recover_x", "train_diffusion", "training_loss", "v_target",
    "GuidanceConfig", "SampleResult", "SamplingDiverged", "cfg_combine", "ddim_sample", "eval_times", "gamma_combine",
    "EvalRow", "FeatureMaps", "bootstrap_summary", "dcs", "dist_to_truth", "dvs", "feature_maps",
    "method_name", "oracle_agreement", "run_benchmark",
    "EvalConfig", "RunConfig", "config_hash", "load_config", "save_config",
    "substream", "substream_seed",
]
