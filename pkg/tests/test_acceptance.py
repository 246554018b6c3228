"""End-to-end checks at the shipped default configuration.

Each test prints a PASS/FAIL line (bypassing capture) so a plain pytest run
reads as a checklist. The benchmark fixture runs the full default pipeline
once; the determinism test runs it a second time into the same directory.
"""

import os
import time

import numpy as np
import pytest

from ecdiff import artifacts
from ecdiff.cli import DEFAULT_CONFIG, main
from ecdiff.config import load_config
from ecdiff.denoiser import denoiser_from_dict
from ecdiff.endpoint import DiagGaussian, fuse, sample_endpoint_eps
from ecdiff.evalmetrics import oracle_agreement
from ecdiff.mlp import backward, forward, init_mlp, mlp_arrays
from ecdiff.oracle import mollifier, mollifier_grad_sup
from ecdiff.promptvae import kl_standard_normal, shape_check_image_mode
from ecdiff.sampling import cfg_combine, gamma_combine
from ecdiff.schedule import (
    Schedule,
    coeffs_weights,
    dlogsnr_dt,
    log_snr,
    loss_weight,
    t_range,
)
from ecdiff.seeding import substream_seed

RUNTIME_BUDGET_S = 900.0


def report(capsys, ok: bool, line: str) -> None:
    with capsys.disabled():
        print(f"\n{'PASS' if ok else 'FAIL'}: {line}")


@pytest.fixture(scope="session")
def repro_run(tmp_path_factory):
    """One full default-config pipeline; returns (out_dir, wall seconds)."""
    out = str(tmp_path_factory.mktemp("acceptance") / "run")
    t0 = time.perf_counter()
    rc = main(["repro", "--config", DEFAULT_CONFIG, "--out-dir", out])
    wall = time.perf_counter() - t0
    assert rc == 0
    return out, wall


def metric_means(out_dir: str, fname: str = "results.csv") -> dict:
    _, cols, rows = artifacts.read_csv(os.path.join(out_dir, fname))
    idx = {c: i for i, c in enumerate(cols)}
    acc: dict = {}
    for r in rows:
        key = (r[idx["method"]], r[idx["metric_name"]])
        acc.setdefault(key, []).append(float(r[idx["value"]]))
    return {k: float(np.mean(v)) for k, v in acc.items()}


# ------------------------------------------------ benchmark ordering / budget


def test_edit_direction_explicit_matches_three_pass(repro_run, capsys):
    m = metric_means(repro_run[0])
    ec, x3 = m[("ec_x1", "dvs")], m[("cfg_x3", "dvs")]
    ok = ec >= x3 - 0.02
    report(capsys, ok, f"mean DVS: one-pass explicit {ec:.4f} >= three-pass CFG {x3:.4f} - 0.02")
    assert ok


def test_edit_direction_three_pass_beats_one_pass(repro_run, capsys):
    m = metric_means(repro_run[0])
    x3, x1 = m[("cfg_x3", "dvs")], m[("cfg_x1", "dvs")]
    ok = x3 > x1 + 0.02
    report(capsys, ok, f"mean DVS: three-pass CFG {x3:.4f} > one-pass CFG {x1:.4f} + 0.02")
    assert ok


def test_distribution_distance_explicit_matches_three_pass(repro_run, capsys):
    m = metric_means(repro_run[0])
    ec, x3 = m[("ec_x1", "w1_sliced")], m[("cfg_x3", "w1_sliced")]
    ok = ec <= 1.1 * x3
    report(capsys, ok, f"mean sliced W1: one-pass explicit {ec:.4f} <= 1.1 * three-pass CFG {x3:.4f}")
    assert ok


def test_distribution_distance_one_pass_worse_than_three_pass(repro_run, capsys):
    m = metric_means(repro_run[0])
    x1, x3 = m[("cfg_x1", "w1_sliced")], m[("cfg_x3", "w1_sliced")]
    ok = x1 >= 1.3 * x3
    report(capsys, ok, f"mean sliced W1: one-pass CFG {x1:.4f} >= 1.3 * three-pass CFG {x3:.4f}")
    assert ok


def test_runtime_budget(repro_run, capsys):
    wall = repro_run[1]
    ok = wall < RUNTIME_BUDGET_S
    report(capsys, ok, f"full benchmark pipeline {wall:.0f}s < {RUNTIME_BUDGET_S:.0f}s")
    assert ok


# ------------------------------------------------------------ call efficiency


def test_denoiser_call_counts(repro_run, capsys):
    _, cols, rows = artifacts.read_csv(os.path.join(repro_run[0], "results.csv"))
    idx = {c: i for i, c in enumerate(cols)}
    calls = {}
    for r in rows:
        if r[idx["metric_name"]] == "denoiser_calls":
            calls.setdefault(r[idx["method"]], set()).add(float(r[idx["value"]]))
    ok = calls["ec_x1"] == {10.0} and calls["cfg_x3"] == {30.0}
    report(capsys, ok, f"calls per sample: explicit {sorted(calls['ec_x1'])}, three-pass CFG {sorted(calls['cfg_x3'])}")
    assert ok


def test_wall_clock_ratio(repro_run, capsys):
    m = metric_means(repro_run[0], "timings.csv")
    ratio = m[("cfg_x3", "wall_time_us")] / m[("ec_x1", "wall_time_us")]
    ok = ratio >= 2.5
    report(capsys, ok, f"wall-clock ratio three-pass/one-pass {ratio:.2f} >= 2.5")
    assert ok


# ------------------------------------------------------------ score agreement


def test_trained_model_matches_analytic_score(repro_run, capsys):
    cfg = load_config(DEFAULT_CONFIG)
    from ecdiff.promptvae import prompt_embeddings

    den = denoiser_from_dict(artifacts.read_json(os.path.join(repro_run[0], "ckpt_implicit.json")))
    emb = prompt_embeddings(cfg.task.n_prompts, cfg.embed_dim)
    vals = {
        t: oracle_agreement(den, cfg.task, cfg.schedule, emb, t, n_probe=256,
                            seed=substream_seed(cfg.seed, f"oracle-{t}"))
        for t in (0.3, 0.5, 0.7)
    }
    ok = all(v > 0.95 for v in vals.values())
    report(capsys, ok, "score cosine vs analytic mixture: "
           + ", ".join(f"t={t}: {v:.4f}" for t, v in vals.items()) + " (all > 0.95)")
    assert ok


# ------------------------------------------------------------ guidance algebra


def test_guidance_combination_identities(capsys):
    rng = np.random.default_rng(0)
    worst = 0.0
    for _ in range(50):
        a, b, c = rng.standard_normal((3, 8, 2)) * 5
        worst = max(worst, float(np.max(np.abs(cfg_combine(a, b, c, 1.0, 1.0) - c))))
    exact = all(
        np.array_equal(gamma_combine(u, v, 1.0), v) and np.array_equal(gamma_combine(u, v, 0.0), u)
        for u, v in [rng.standard_normal((2, 6, 2)) for _ in range(20)]
    )
    ok = worst < 1e-12 and exact
    report(capsys, ok, f"neutral-scale guidance == conditional (max err {worst:.2e} < 1e-12); "
           f"gamma endpoints exact: {exact}")
    assert ok


# ------------------------------------------------------------- endpoint fusion


def test_fused_endpoint_moments(capsys):
    a = DiagGaussian(np.array([1.0, -2.0]), np.array([0.5, 1.5]))
    b = DiagGaussian(np.array([0.5, 3.0]), np.array([2.0, 0.25]))
    f = fuse(a, b)
    n = 100_000
    eps = np.random.default_rng(7).standard_normal((n, 2))
    draws = sample_endpoint_eps(f, eps)

    want_mean = a.mean + b.mean
    want_var = a.var + b.var
    se_mean = np.sqrt(want_var / n)
    se_var = want_var * np.sqrt(2.0 / (n - 1))
    dm = np.abs(draws.mean(axis=0) - want_mean) / se_mean
    dv = np.abs(draws.var(axis=0, ddof=1) - want_var) / se_var
    ok = bool(np.all(dm < 3.0) and np.all(dv < 3.0))
    report(capsys, ok, f"fused endpoint sums means and variances: mean z={dm.max():.2f}, var z={dv.max():.2f} (< 3 SE)")
    assert ok


# ---------------------------------------------------------- schedule identities


def test_schedule_identities(capsys):
    sched = Schedule()
    lo, hi = t_range(sched)
    t = np.linspace(lo, hi, 1000)
    a, s, _, _ = coeffs_weights(sched, t)
    vp_err = float(np.max(np.abs(a**2 + s**2 - 1.0)))

    rng = np.random.default_rng(3)
    x, e = rng.standard_normal((2, 1000))
    z = a * x + s * e
    v = a * e - s * x
    ident_err = float(max(np.max(np.abs(a * z - s * v - x)), np.max(np.abs(s * z + a * v - e))))

    h = 1e-6
    slope_rel = 0.0
    for tm in np.linspace(0.05, 0.95, 200):
        fd = (log_snr(sched, tm + h) - log_snr(sched, tm - h)) / (2 * h)
        slope_rel = max(slope_rel, abs(fd - dlogsnr_dt(sched, tm)) / abs(fd))

    w0 = loss_weight(sched, 0.0)
    ok = vp_err < 1e-12 and ident_err < 1e-10 and slope_rel < 1e-6 and w0 == 1.0
    report(capsys, ok, f"variance preservation {vp_err:.1e} < 1e-12; v recovery identities {ident_err:.1e} < 1e-10; "
           f"slope vs finite diff {slope_rel:.1e} < 1e-6; weight at lambda=0 is {w0}")
    assert ok


# ------------------------------------------------------------ network gradients


def test_network_gradients_match_finite_differences(capsys):
    rng = np.random.default_rng(11)
    worst = 0.0
    for sizes, norm in [((6, 16, 16, 2), False), ((4, 12, 12, 3), True), ((3, 8, 1), False)]:
        net = init_mlp(sizes, rng=rng, norm=norm)
        x = rng.standard_normal((5, sizes[0]))
        gout = rng.standard_normal((5, sizes[-1]))
        _, cache = forward(net, x)
        grads, _ = backward(net, cache, gout)
        flat_g = np.concatenate([np.concatenate([dw.ravel(), db.ravel()]) for dw, db in grads])
        arrays = mlp_arrays(net)
        offsets = np.cumsum([0] + [a.size for a in arrays])
        pick = rng.choice(offsets[-1], size=min(80, offsets[-1]), replace=False)
        for j in pick:
            k = int(np.searchsorted(offsets, j, side="right") - 1)
            local = j - offsets[k]
            h = 1e-4

            def loss_at(delta):
                pert = [a.copy() for a in arrays]
                pert[k].flat[local] += delta
                layers = tuple((pert[2 * i], pert[2 * i + 1]) for i in range(len(net.layers)))
                out, _ = forward(type(net)(layers, net.activation, net.norm), x)
                return float(np.sum(out * gout))

            fd = (loss_at(h) - loss_at(-h)) / (2 * h)
            scale = max(abs(fd), abs(float(flat_g[j])), 1e-8)
            worst = max(worst, abs(fd - float(flat_g[j])) / scale)
    ok = worst < 1e-4
    report(capsys, ok, f"analytic gradients vs central differences: worst rel err {worst:.2e} < 1e-4")
    assert ok


# ------------------------------------------------------------------- mollifier


def test_mollifier_profile(capsys):
    delta = 0.1
    ramp_err = abs(mollifier(delta, delta / 2) - np.exp(-1.0 / 3.0))
    plateau = np.linspace(delta, 1 - delta, 501)
    plateau_exact = bool(np.all(mollifier(delta, plateau) == 1.0))
    ratio = mollifier_grad_sup(0.01) / mollifier_grad_sup(0.1)
    ok = ramp_err < 1e-9 and plateau_exact and ratio > 5.0
    report(capsys, ok, f"ramp midpoint off by {ramp_err:.1e} (< 1e-9); plateau exactly one: {plateau_exact}; "
           f"slope ratio delta 0.01/0.1 = {ratio:.1f} > 5")
    assert ok


# ------------------------------------------------------------------ prompt VAE


def test_prompt_vae_criteria(repro_run, capsys):
    shapes = shape_check_image_mode()
    _, cols, rows = artifacts.read_csv(os.path.join(repro_run[0], "vae_loss.csv"))
    recon = [float(r[cols.index("recon")]) for r in rows]
    recon_ok = recon[-1] < 0.1 * recon[0]

    d = 16
    kl = float(np.mean(kl_standard_normal(np.ones((1, d)), np.zeros((1, d))))) / d
    kl_ok = abs(kl - 0.5) < 1e-12

    ok = shapes["ok"] and recon_ok and kl_ok
    report(capsys, ok, f"image-scale encoder stages all pass: {shapes['ok']}; "
           f"reconstruction {recon[-1]:.4f} < 10% of initial {recon[0]:.4f}: {recon_ok}; "
           f"KL at unit mean/variance = {kl:.6f} per dim (0.5 exact)")
    assert ok


# ----------------------------------------------------------------- determinism


def test_benchmark_bytes_reproduce(repro_run, capsys):
    out = repro_run[0]
    with open(os.path.join(out, "results.csv"), "rb") as f:
        first = f.read()
    rc = main(["repro", "--config", DEFAULT_CONFIG, "--out-dir", out])
    with open(os.path.join(out, "results.csv"), "rb") as f:
        second = f.read()
    ok = rc == 0 and first == second
    report(capsys, ok, f"two identical runs produce byte-identical results ({len(first)} bytes)")
    assert ok
