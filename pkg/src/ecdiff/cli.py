"""Command-line entry point.

Subcommands: gen-data, train-prompt-vae, train, sample, eval, oracle-check,
mollifier-demo, shape-check, repro. Exit codes: 0 success, 1 validation
error (bad input, missing file), 2 runtime failure.

All randomness flows from one global seed through named substreams, so each
stage is independently reproducible; `repro` chains the whole pipeline.
"""

import argparse
import os
import sys
from dataclasses import replace

import numpy as np

from . import artifacts
from .config import RunConfig, config_hash, load_config
from .denoiser import denoiser_from_dict, denoiser_to_dict
from .evalmetrics import (
    bootstrap_summary,
    dist_to_truth,
    feature_maps,
    method_name,
    oracle_agreement,
    run_benchmark,
)
from .oracle import log_density, marginal_at_t, mollifier_grad_sup, score
from .promptvae import (
    encode_prompt,
    prompt_embeddings,
    shape_check_image_mode,
    train_prompt_vae,
    vae_from_dict,
    vae_to_dict,
)
from .sampling import ddim_sample
from .seeding import substream, substream_seed
from .tasks import context_gaussian, gen_dataset
from .training import train_diffusion

DEFAULT_CONFIG = os.path.join(os.path.dirname(os.path.dirname(os.path.dirname(os.path.abspath(__file__)))), "configs", "default.json")


def _load(args) -> tuple[RunConfig, dict]:
    cfg = load_config(args.config)
    if getattr(args, "seed", None) is not None:
        cfg = replace(cfg, seed=args.seed)
    if getattr(args, "out_dir", None) is not None:
        cfg = replace(cfg, out_dir=args.out_dir)
    os.makedirs(cfg.out_dir, exist_ok=True)
    return cfg, {"config_hash": config_hash(cfg), "seed": cfg.seed}


def _require(path: str) -> str:
    if not os.path.exists(path):
        raise FileNotFoundError(f"missing required file: {path} (run the earlier pipeline stage first)")
    return path


def _dataset_path(cfg) -> str:
    return os.path.join(cfg.out_dir, "dataset.csv")


def _vae_path(cfg) -> str:
    return os.path.join(cfg.out_dir, "vae.json")


def _ckpt_path(cfg, mode: str) -> str:
    return os.path.join(cfg.out_dir, f"ckpt_{mode}.json")


def cmd_gen_data(args) -> int:
    cfg, meta = _load(args)
    triples = gen_dataset(cfg.task, cfg.n_train, substream_seed(cfg.seed, "data"))
    _write_dataset(_dataset_path(cfg), triples, cfg.task.dim, meta)
    print(f"wrote {_dataset_path(cfg)} ({len(triples)} triples)")
    return 0


def _write_dataset(path, triples, d, meta):
    cols = [f"ctx_{k}" for k in range(d)] + ["prompt_id"] + [f"tgt_{k}" for k in range(d)]
    rows = [list(tr.context) + [tr.prompt_id] + list(tr.target) for tr in triples]
    artifacts.write_csv(path, cols, rows, meta)


def _read_dataset(path):
    _, cols, rows = artifacts.read_csv(path)
    d = sum(c.startswith("ctx_") for c in cols)
    ctx = np.array([[float(v) for v in r[:d]] for r in rows])
    pid = np.array([int(r[d]) for r in rows])
    tgt = np.array([[float(v) for v in r[d + 1 : 2 * d + 1]] for r in rows])
    return ctx, pid, tgt


def cmd_train_prompt_vae(args) -> int:
    cfg, meta = _load(args)
    emb = prompt_embeddings(cfg.task.n_prompts, cfg.embed_dim)
    vcfg = replace(cfg.prompt_vae, seed=substream_seed(cfg.seed, "prompt-vae"))
    vae, trace = train_prompt_vae(emb, vcfg)
    artifacts.write_json(_vae_path(cfg), vae_to_dict(vae), meta)
    artifacts.write_csv(
        os.path.join(cfg.out_dir, "vae_loss.csv"),
        ["step", "loss", "recon", "kl"],
        [[r["step"], r["loss"], r["recon"], r["kl"]] for r in trace],
        meta,
    )
    print(f"wrote {_vae_path(cfg)} (final loss {trace[-1]['loss']:.4f})")
    return 0


def _train_one(cfg, meta, mode: str, dataset, vae, emb, seed: int):
    tcfg = replace(
        cfg.train_implicit if mode == "implicit" else cfg.train_explicit,
        seed=substream_seed(seed, f"train-{mode}"),
        embed_dim=cfg.embed_dim,
    )
    den, trace = train_diffusion(
        dataset, tcfg, cfg.schedule, emb, vae=vae if mode == "explicit" else None,
        ctx_encoder_std=cfg.task.ctx_encoder_std,
    )
    return den, trace


def cmd_train(args) -> int:
    cfg, meta = _load(args)
    dataset = _read_dataset(_require(_dataset_path(cfg)))
    emb = prompt_embeddings(cfg.task.n_prompts, cfg.embed_dim)
    vae = None
    if args.mode == "explicit":
        vae = vae_from_dict(artifacts.read_json(_require(_vae_path(cfg))))
    den, trace = _train_one(cfg, meta, args.mode, dataset, vae, emb, cfg.seed)
    artifacts.write_json(_ckpt_path(cfg, args.mode), denoiser_to_dict(den), meta)
    artifacts.write_csv(
        os.path.join(cfg.out_dir, f"losses_{args.mode}.csv"),
        ["step", "loss", "mode", "seed"],
        [[r["step"], r["loss"], args.mode, cfg.seed] for r in trace],
        meta,
    )
    print(f"wrote {_ckpt_path(cfg, args.mode)} (final loss {trace[-1]['loss']:.4f})")
    return 0


def cmd_sample(args) -> int:
    cfg, meta = _load(args)
    emb = prompt_embeddings(cfg.task.n_prompts, cfg.embed_dim)
    by_name = {method_name(g): g for g in cfg.guidance}
    if args.method not in by_name:
        raise ValueError(f"unknown method {args.method!r}; choose from {sorted(by_name)}")
    g = by_name[args.method]
    mode = "explicit" if g.mode == "explicit" else "implicit"
    den = denoiser_from_dict(artifacts.read_json(_require(_ckpt_path(cfg, mode))))

    rng = substream(cfg.seed, "sample")
    comp = rng.choice(cfg.task.context_weights.shape[0], p=cfg.task.context_weights)
    ctx = cfg.task.context_means[comp] + np.sqrt(cfg.task.context_covs[comp]) * rng.standard_normal(cfg.task.dim)
    pid = int(rng.integers(0, cfg.task.n_prompts))
    pemb = emb[pid]
    if mode == "explicit":
        vae = vae_from_dict(artifacts.read_json(_require(_vae_path(cfg))))
        from .endpoint import fuse

        ep = fuse(context_gaussian(cfg.task, ctx), encode_prompt(vae, pemb))
        start = ep.mean + np.sqrt(ep.var) * rng.standard_normal((args.n, cfg.task.dim))
        cond = (None, pemb if den.cfg.uses_prompt_input else None)
    else:
        start = rng.standard_normal((args.n, cfg.task.dim))
        cond = (ctx, pemb)
    res = ddim_sample(den, cfg.schedule, start, cond, g)

    cols = ["sample_id"] + [f"x_{k}" for k in range(cfg.task.dim)] + ["denoiser_calls", "wall_time_us"]
    per_call = res.denoiser_calls // args.n
    rows = [[i] + list(res.final[i]) + [per_call, res.wall_time_us / args.n] for i in range(args.n)]
    out = args.out or os.path.join(cfg.out_dir, f"samples_{args.method}.csv")
    artifacts.write_csv(out, cols, rows, {**meta, "method": args.method, "prompt_id": pid})
    print(f"wrote {out} ({args.n} samples, method {args.method})")
    return 0


def _benchmark_once(cfg, vae, dens, emb, fm, bench_seed: int, run_id: str):
    return run_benchmark(
        dens,
        cfg.task,
        fm,
        list(cfg.guidance),
        cfg.eval.n_eval,
        bench_seed,
        cfg.schedule,
        vae,
        emb,
        run_id=run_id,
        n_conditions=cfg.eval.n_conditions,
    )


EVAL_COLS = ["run_id", "method", "passes", "metric_name", "value", "seed"]


def _rows_csv(rows):
    return [[r.run_id, r.method, r.passes, r.metric_name, r.value, r.seed] for r in rows]


def cmd_eval(args) -> int:
    cfg, meta = _load(args)
    emb = prompt_embeddings(cfg.task.n_prompts, cfg.embed_dim)
    vae = vae_from_dict(artifacts.read_json(_require(_vae_path(cfg))))
    dens = {
        "implicit": denoiser_from_dict(artifacts.read_json(_require(_ckpt_path(cfg, "implicit")))),
        "explicit": denoiser_from_dict(artifacts.read_json(_require(_ckpt_path(cfg, "explicit")))),
    }
    fm = feature_maps(cfg.task.dim, cfg.task.n_prompts, cfg.eval.feature_dim, substream_seed(cfg.seed, "features"))
    bench = _benchmark_once(cfg, vae, dens, emb, fm, substream_seed(cfg.seed, "benchmark"), "eval")
    artifacts.write_csv(os.path.join(cfg.out_dir, "results.csv"), EVAL_COLS, _rows_csv(bench.rows), meta)
    artifacts.write_csv(os.path.join(cfg.out_dir, "timings.csv"), EVAL_COLS, _rows_csv(bench.timing_rows), meta)
    summary = bootstrap_summary(bench.rows, cfg.eval.bootstrap, substream_seed(cfg.seed, "bootstrap"))
    artifacts.write_json(os.path.join(cfg.out_dir, "summary.json"), {"methods": summary}, meta)
    print(f"wrote {os.path.join(cfg.out_dir, 'results.csv')}")
    return 0


def cmd_oracle_check(args) -> int:
    cfg, meta = _load(args)
    task, sched = cfg.task, cfg.schedule
    rng = substream(cfg.seed, "oracle-check")
    rows = []
    for t in (0.1, 0.3, 0.5, 0.7, 0.9):
        gm = marginal_at_t(task, sched, t)
        z = rng.standard_normal((64, task.dim)) * 1.5
        h = 1e-5
        worst = 0.0
        for zi in z:
            s = score(gm, zi)
            fd = np.empty_like(s)
            for k in range(task.dim):
                e = np.zeros(task.dim)
                e[k] = h
                fd[k] = (log_density(gm, zi + e) - log_density(gm, zi - e)) / (2 * h)
            denom = max(float(np.linalg.norm(s)), 1e-12)
            worst = max(worst, float(np.linalg.norm(s - fd)) / denom)
        rows.append([t, "score_vs_finite_difference_max_rel_err", worst])

    if args.checkpoint:
        den = denoiser_from_dict(artifacts.read_json(_require(args.checkpoint)))
        emb = prompt_embeddings(task.n_prompts, cfg.embed_dim)
        for t in (0.3, 0.5, 0.7):
            cosv = oracle_agreement(
                den, task, sched, emb, t, cfg.eval.oracle_probes, substream_seed(cfg.seed, f"oracle-{t}")
            )
            rows.append([t, "model_score_cosine", cosv])
    out = os.path.join(cfg.out_dir, "oracle_check.csv")
    artifacts.write_csv(out, ["t", "check", "value"], rows, meta)
    print(f"wrote {out}")
    return 0


def cmd_mollifier_demo(args) -> int:
    cfg, meta = _load(args)
    deltas = [float(x) for x in args.deltas.split(",")]
    rows = [[d, mollifier_grad_sup(d)] for d in deltas]
    out = os.path.join(cfg.out_dir, "mollifier.csv")
    artifacts.write_csv(out, ["delta", "grad_sup"], rows, meta)
    print(f"wrote {out}")
    return 0


def cmd_shape_check(args) -> int:
    report = shape_check_image_mode()
    for s in report["stages"]:
        status = "pass" if s["ok"] else "FAIL"
        print(f"{status}  {s['stage']}: expected {s['expected']}, got {s['got']}")
    if not report["ok"]:
        print("shape check failed", file=sys.stderr)
        return 2
    print("all stages pass")
    return 0


def cmd_repro(args) -> int:
    cfg, meta = _load(args)
    emb = prompt_embeddings(cfg.task.n_prompts, cfg.embed_dim)
    fm = feature_maps(cfg.task.dim, cfg.task.n_prompts, cfg.eval.feature_dim, substream_seed(cfg.seed, "features"))
    all_rows, all_timing, loss_rows = [], [], []
    first_bench = None
    for i in range(cfg.eval.n_seeds):
        s = substream_seed(cfg.seed, f"bench-{i}")
        print(f"[seed {i + 1}/{cfg.eval.n_seeds}] data + prompt VAE ...", flush=True)
        triples = gen_dataset(cfg.task, cfg.n_train, substream_seed(s, "data"))
        vae, vae_trace = train_prompt_vae(emb, replace(cfg.prompt_vae, seed=substream_seed(s, "prompt-vae")))
        dens = {}
        for mode in ("implicit", "explicit"):
            print(f"[seed {i + 1}/{cfg.eval.n_seeds}] training {mode} ...", flush=True)
            dens[mode], trace = _train_one(cfg, meta, mode, triples, vae, emb, s)
            loss_rows += [[r["step"], r["loss"], mode, i] for r in trace]
        print(f"[seed {i + 1}/{cfg.eval.n_seeds}] benchmark ...", flush=True)
        bench = _benchmark_once(cfg, vae, dens, emb, fm, substream_seed(s, "benchmark"), f"run{i}")
        all_rows += bench.rows
        all_timing += bench.timing_rows
        if i == 0:
            first_bench = bench
            _write_dataset(_dataset_path(cfg), triples, cfg.task.dim, meta)
            artifacts.write_json(_vae_path(cfg), vae_to_dict(vae), meta)
            artifacts.write_csv(
                os.path.join(cfg.out_dir, "vae_loss.csv"),
                ["step", "loss", "recon", "kl"],
                [[r["step"], r["loss"], r["recon"], r["kl"]] for r in vae_trace],
                meta,
            )
            for mode in ("implicit", "explicit"):
                artifacts.write_json(_ckpt_path(cfg, mode), denoiser_to_dict(dens[mode]), meta)

    artifacts.write_csv(os.path.join(cfg.out_dir, "results.csv"), EVAL_COLS, _rows_csv(all_rows), meta)
    artifacts.write_csv(os.path.join(cfg.out_dir, "timings.csv"), EVAL_COLS, _rows_csv(all_timing), meta)
    artifacts.write_csv(os.path.join(cfg.out_dir, "losses.csv"), ["step", "loss", "mode", "seed"], loss_rows, meta)
    summary = bootstrap_summary(all_rows, cfg.eval.bootstrap, substream_seed(cfg.seed, "bootstrap"))
    artifacts.write_json(os.path.join(cfg.out_dir, "summary.json"), {"methods": summary}, meta)
    for name, pts in first_bench.samples.items():
        g = next(g for g in cfg.guidance if method_name(g) == name)
        cols = ["sample_id"] + [f"x_{k}" for k in range(cfg.task.dim)] + ["denoiser_calls", "wall_time_us"]
        calls = g.passes * g.steps
        rows = [[j] + list(pts[j]) + [calls, 0.0] for j in range(pts.shape[0])]
        artifacts.write_csv(
            os.path.join(cfg.out_dir, f"samples_{name}.csv"), cols, rows,
            {**meta, "method": name, "timing": "see timings.csv"},
        )
    rows = [[d, mollifier_grad_sup(d)] for d in (0.01, 0.02, 0.05, 0.1, 0.2)]
    artifacts.write_csv(os.path.join(cfg.out_dir, "mollifier.csv"), ["delta", "grad_sup"], rows, meta)
    print(f"repro complete: {os.path.join(cfg.out_dir, 'results.csv')}")
    return 0


def _build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="ecdiff", description=__doc__)
    sub = p.add_subparsers(dest="command", required=True)

    def common(sp):
        sp.add_argument("--config", default=DEFAULT_CONFIG, help="run config JSON")
        sp.add_argument("--seed", type=int, default=None, help="override the global seed")
        sp.add_argument("--out-dir", default=None, help="override the output directory")

    common(sub.add_parser("gen-data", help="generate the synthetic editing dataset"))
    common(sub.add_parser("train-prompt-vae", help="train the prompt VAE"))
    sp = sub.add_parser("train", help="train a denoiser")
    common(sp)
    sp.add_argument("--mode", choices=("implicit", "explicit"), required=True)
    sp = sub.add_parser("sample", help="sample from a trained model")
    common(sp)
    sp.add_argument("--method", required=True, help="guidance name, e.g. cfg_x3 or ec_x1")
    sp.add_argument("--n", type=int, default=256)
    sp.add_argument("--out", default=None)
    common(sub.add_parser("eval", help="run the benchmark for one seed"))
    sp = sub.add_parser("oracle-check", help="score-agreement checks against the closed forms")
    common(sp)
    sp.add_argument("--checkpoint", default=None, help="optional implicit checkpoint to compare")
    sp = sub.add_parser("mollifier-demo", help="tabulate sup |d mollifier/dx| against delta")
    common(sp)
    sp.add_argument("--deltas", default="0.01,0.02,0.05,0.1,0.2")
    sub.add_parser("shape-check", help="paper-scale encoder shape walk")
    common(sub.add_parser("repro", help="full pipeline: data, VAE, trainings, benchmark"))

    handlers = {
        "gen-data": cmd_gen_data,
        "train-prompt-vae": cmd_train_prompt_vae,
        "train": cmd_train,
        "sample": cmd_sample,
        "eval": cmd_eval,
        "oracle-check": cmd_oracle_check,
        "mollifier-demo": cmd_mollifier_demo,
        "shape-check": cmd_shape_check,
        "repro": cmd_repro,
    }
    p.set_defaults(handlers=handlers)
    return p


def main(argv=None) -> int:
    parser = _build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as e:
        return 0 if e.code in (0, None) else 1
    try:
        return args.handlers[args.command](args)
    except (ValueError, FileNotFoundError, KeyError, OSError) as e:
        print(f"error: {e}", file=sys.stderr)
        return 1
    except Exception as e:  # anything else is a runtime failure
        print(f"runtime failure: {type(e).__name__}: {e}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
