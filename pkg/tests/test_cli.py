"""Subcommand behavior, exit codes, and artifact file formats."""

import json
import os

import numpy as np
import pytest

from ecdiff import artifacts
from ecdiff.cli import main
from ecdiff.config import (
    config_json,
    EvalConfig,
    RunConfig,
    config_from_dict,
    config_hash,
    config_to_dict,
    load_config,
    save_config,
)
from ecdiff.promptvae import VaeTrainConfig
from ecdiff.sampling import GuidanceConfig
from ecdiff.schedule import Schedule
from ecdiff.tasks import default_task
from ecdiff.training import TrainConfig


def tiny_config(out_dir: str) -> RunConfig:
    """A config small enough that the whole pipeline runs in seconds."""
    return RunConfig(
        seed=0,
        out_dir=out_dir,
        task=default_task(),
        schedule=Schedule(),
        embed_dim=16,
        n_train=512,
        prompt_vae=VaeTrainConfig(steps=300),
        train_implicit=TrainConfig(mode="implicit", steps=200, hidden=(32, 32)),
        train_explicit=TrainConfig(mode="explicit", steps=200, hidden=(32, 32)),
        guidance=(
            GuidanceConfig("implicit_cfg", 1.0, 1.0, 4),
            GuidanceConfig("implicit_cfg", 1.6, 7.5, 4),
            GuidanceConfig("explicit", steps=4),
        ),
        eval=EvalConfig(n_eval=400, n_conditions=4, n_seeds=2, bootstrap=100, oracle_probes=32),
    )


@pytest.fixture()
def cfg_file(tmp_path):
    cfg = tiny_config(str(tmp_path / "out"))
    path = str(tmp_path / "tiny.json")
    save_config(cfg, path)
    return path, cfg


# -------------------------------------------------------------------- config


def test_config_round_trip(cfg_file):
    path, cfg = cfg_file
    loaded = load_config(path)
    # dataclass == chokes on array fields; the canonical JSON is the identity
    assert config_json(loaded) == config_json(cfg)
    assert config_hash(loaded) == config_hash(cfg)
    assert config_json(config_from_dict(config_to_dict(cfg))) == config_json(cfg)


def test_config_hash_tracks_content(cfg_file):
    _, cfg = cfg_file
    import dataclasses

    other = dataclasses.replace(cfg, n_train=cfg.n_train + 1)
    assert config_hash(other) != config_hash(cfg)
    assert config_hash(cfg) == config_hash(cfg)
    assert len(config_hash(cfg)) == 12


def test_config_rejects_swapped_modes(cfg_file):
    _, cfg = cfg_file
    import dataclasses

    with pytest.raises(ValueError):
        dataclasses.replace(cfg, train_implicit=cfg.train_explicit)


# ----------------------------------------------------------------- artifacts


def test_csv_round_trip(tmp_path):
    path = str(tmp_path / "t.csv")
    artifacts.write_csv(path, ["a", "b"], [[1, 2.5], [3, -0.125]], {"config_hash": "abc", "seed": 7})
    meta, cols, rows = artifacts.read_csv(path)
    assert meta == {"config_hash": "abc", "seed": "7"}
    assert cols == ["a", "b"]
    assert [[float(v) for v in r] for r in rows] == [[1.0, 2.5], [3.0, -0.125]]
    with open(path) as f:
        assert f.readline().startswith("# config_hash=abc seed=7")


def test_csv_rejects_ragged_rows(tmp_path):
    with pytest.raises(ValueError):
        artifacts.write_csv(str(tmp_path / "t.csv"), ["a", "b"], [[1]], {})


def test_json_meta_embedded(tmp_path):
    path = str(tmp_path / "t.json")
    artifacts.write_json(path, {"x": [1, 2]}, {"config_hash": "ff", "seed": 3})
    d = artifacts.read_json(path)
    assert d["meta"] == {"config_hash": "ff", "seed": 3}
    assert d["x"] == [1, 2]


# --------------------------------------------------------------- subcommands


def run_cli(*argv) -> int:
    return main(list(argv))


def test_gen_data_artifact(cfg_file):
    path, cfg = cfg_file
    assert run_cli("gen-data", "--config", path) == 0
    meta, cols, rows = artifacts.read_csv(os.path.join(cfg.out_dir, "dataset.csv"))
    assert cols == ["ctx_0", "ctx_1", "prompt_id", "tgt_0", "tgt_1"]
    assert len(rows) == cfg.n_train
    assert meta["config_hash"] == config_hash(cfg)
    assert meta["seed"] == "0"
    pids = {int(r[2]) for r in rows}
    assert pids <= set(range(cfg.task.n_prompts))


def test_train_requires_dataset(cfg_file, capsys):
    path, cfg = cfg_file
    assert run_cli("train", "--config", path, "--mode", "implicit") == 1
    err = capsys.readouterr().err
    assert "dataset.csv" in err


def test_eval_requires_checkpoints(cfg_file, capsys):
    path, cfg = cfg_file
    assert run_cli("eval", "--config", path) == 1
    assert "vae.json" in capsys.readouterr().err


def test_unknown_method_is_validation_error(cfg_file, capsys):
    path, _ = cfg_file
    assert run_cli("sample", "--config", path, "--method", "cfg_x9") == 1


def test_unknown_subcommand(capsys):
    assert run_cli("frobnicate") == 1


def test_shape_check(capsys):
    assert run_cli("shape-check") == 0
    out = capsys.readouterr().out
    assert "all stages pass" in out
    assert "subpixel_4x64x64" in out


def test_mollifier_demo(cfg_file):
    path, cfg = cfg_file
    assert run_cli("mollifier-demo", "--config", path, "--deltas", "0.01,0.1") == 0
    _, cols, rows = artifacts.read_csv(os.path.join(cfg.out_dir, "mollifier.csv"))
    assert cols == ["delta", "grad_sup"]
    got = {float(r[0]): float(r[1]) for r in rows}
    assert got[0.01] / got[0.1] > 5.0


def test_oracle_check_without_checkpoint(cfg_file):
    path, cfg = cfg_file
    assert run_cli("oracle-check", "--config", path) == 0
    _, cols, rows = artifacts.read_csv(os.path.join(cfg.out_dir, "oracle_check.csv"))
    assert cols == ["t", "check", "value"]
    assert all(float(r[2]) < 1e-4 for r in rows if r[1] == "score_vs_finite_difference_max_rel_err")


# ------------------------------------------------------------- full pipeline


@pytest.fixture(scope="module")
def pipeline(tmp_path_factory):
    """gen-data + VAE + both trainings, shared by the stage tests below."""
    root = tmp_path_factory.mktemp("pipe")
    cfg = tiny_config(str(root / "out"))
    path = str(root / "tiny.json")
    save_config(cfg, path)
    for argv in (
        ("gen-data", "--config", path),
        ("train-prompt-vae", "--config", path),
        ("train", "--config", path, "--mode", "implicit"),
        ("train", "--config", path, "--mode", "explicit"),
    ):
        assert main(list(argv)) == 0
    return path, cfg


def test_stagewise_artifacts(pipeline):
    _, cfg = pipeline
    for name in ("dataset.csv", "vae.json", "vae_loss.csv",
                 "ckpt_implicit.json", "ckpt_explicit.json",
                 "losses_implicit.csv", "losses_explicit.csv"):
        assert os.path.exists(os.path.join(cfg.out_dir, name)), name
    ck = artifacts.read_json(os.path.join(cfg.out_dir, "ckpt_implicit.json"))
    assert ck["meta"]["config_hash"] == config_hash(cfg)
    assert ck["mode"] == "implicit"


def test_sample_stage(pipeline):
    path, cfg = pipeline
    assert run_cli("sample", "--config", path, "--method", "cfg_x3", "--n", "16") == 0
    meta, cols, rows = artifacts.read_csv(os.path.join(cfg.out_dir, "samples_cfg_x3.csv"))
    assert cols == ["sample_id", "x_0", "x_1", "denoiser_calls", "wall_time_us"]
    assert len(rows) == 16
    assert meta["method"] == "cfg_x3"
    assert all(int(r[3]) == 3 * 4 for r in rows)  # 3 passes x 4 steps

    assert run_cli("sample", "--config", path, "--method", "ec_x1", "--n", "16") == 0
    _, _, rows = artifacts.read_csv(os.path.join(cfg.out_dir, "samples_ec_x1.csv"))
    assert all(int(r[3]) == 4 for r in rows)


def test_eval_stage(pipeline):
    path, cfg = pipeline
    assert run_cli("eval", "--config", path) == 0
    meta, cols, rows = artifacts.read_csv(os.path.join(cfg.out_dir, "results.csv"))
    assert cols == ["run_id", "method", "passes", "metric_name", "value", "seed"]
    methods = {r[1] for r in rows}
    assert methods == {"cfg_x1", "cfg_x3", "ec_x1"}
    metrics = {r[3] for r in rows}
    assert metrics == {"dcs", "dvs", "w1_sliced", "mmd", "denoiser_calls"}
    _, _, trows = artifacts.read_csv(os.path.join(cfg.out_dir, "timings.csv"))
    assert {r[3] for r in trows} == {"wall_time_us"}
    summary = artifacts.read_json(os.path.join(cfg.out_dir, "summary.json"))
    assert set(summary["methods"]) == methods


def test_oracle_check_with_checkpoint(pipeline):
    path, cfg = pipeline
    ckpt = os.path.join(cfg.out_dir, "ckpt_implicit.json")
    assert run_cli("oracle-check", "--config", path, "--checkpoint", ckpt) == 0
    _, _, rows = artifacts.read_csv(os.path.join(cfg.out_dir, "oracle_check.csv"))
    cos_rows = [r for r in rows if r[1] == "model_score_cosine"]
    assert [float(r[0]) for r in cos_rows] == [0.3, 0.5, 0.7]
    assert all(-1.0 <= float(r[2]) <= 1.0 for r in cos_rows)


def test_repro_byte_identical(tmp_path):
    cfg = tiny_config(str(tmp_path / "a"))
    path = str(tmp_path / "tiny.json")
    save_config(cfg, path)
    assert run_cli("repro", "--config", path) == 0
    with open(os.path.join(cfg.out_dir, "results.csv"), "rb") as f:
        first = f.read()
    # same config, same destination: the second run must overwrite with
    # byte-identical content (a different out_dir would change the hash line)
    assert run_cli("repro", "--config", path) == 0
    with open(os.path.join(cfg.out_dir, "results.csv"), "rb") as f:
        second = f.read()
    assert first == second
    # per-method sample dumps exist for every configured guidance
    for name in ("cfg_x1", "cfg_x3", "ec_x1"):
        assert os.path.exists(os.path.join(cfg.out_dir, f"samples_{name}.csv"))


def test_seed_override_changes_results(tmp_path):
    cfg = tiny_config(str(tmp_path / "a"))
    path = str(tmp_path / "tiny.json")
    save_config(cfg, path)
    assert run_cli("gen-data", "--config", path) == 0
    assert run_cli("gen-data", "--config", path, "--seed", "1", "--out-dir", str(tmp_path / "b")) == 0
    a = open(os.path.join(cfg.out_dir, "dataset.csv"), "rb").read()
    b = open(str(tmp_path / "b" / "dataset.csv"), "rb").read()
    assert a != b
    meta, _, _ = artifacts.read_csv(str(tmp_path / "b" / "dataset.csv"))
    assert meta["seed"] == "1"
