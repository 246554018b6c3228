"""Synthetic editing tasks: edit maps, dataset statistics, determinism."""

import numpy as np
from dataclasses import replace

from ecdiff.tasks import (
    context_gaussian,
    default_task,
    gen_arrays,
    gen_dataset,
    noiseless_edit,
    true_conditional,
)


def test_zero_noise_limit_shift_is_exact(task):
    # edit_noise_std must stay positive; the no-noise contract is a limit
    t0 = replace(task, edit_noise_std=1e-12)
    p = t0.prompts[0]  # prompt 0 is a pure shift in the default task
    assert np.allclose(p.A, np.eye(2))
    ctx = np.array([0.3, -1.7])
    triples = [tr for tr in gen_dataset(t0, 400, seed=9) if tr.prompt_id == 0]
    assert triples
    for tr in triples:
        assert np.allclose(tr.target, tr.context + p.b, atol=1e-10)
    assert np.allclose(noiseless_edit(t0, ctx, 0), ctx + p.b, atol=1e-15)


def test_rotation_prompt_mean():
    task = default_task()
    rot = [p for p in task.prompts if not np.allclose(p.A, np.eye(2) * p.A[0, 0])]
    assert rot, "default task should include a rotation prompt"
    p = rot[0]
    out = p.A @ np.array([1.0, 0.0]) + p.b
    assert np.allclose(out, [0.0, 1.0], atol=1e-12)


def test_true_conditional_mean_and_var(task):
    ctx = np.array([-2.0, 0.5])
    for p in task.prompts:
        g = true_conditional(task, ctx, p.prompt_id)
        assert np.allclose(g.mean, p.A @ ctx + p.b, atol=1e-12)
        assert np.allclose(g.var, task.edit_noise_std**2, atol=1e-15)


def test_context_mixture_mean_three_se(task):
    n = 100_000
    ctx, _, _ = gen_arrays(task, n, np.random.default_rng(2))
    w = np.asarray(task.context_weights)
    means = np.asarray(task.context_means)
    covs = np.asarray(task.context_covs)  # scalar variance per component
    mix_mean = w @ means
    second = (w[:, None] * (covs[:, None] + means**2)).sum(axis=0)
    var = second - mix_mean**2
    se = np.sqrt(var / n)
    assert np.all(np.abs(ctx.mean(axis=0) - mix_mean) < 3 * se)


def test_prompt_frequency_uniform_three_se(task):
    n = 100_000
    _, pid, _ = gen_arrays(task, n, np.random.default_rng(4))
    k = len(task.prompts)
    p = 1.0 / k
    se = np.sqrt(p * (1 - p) / n)
    for j in range(k):
        assert abs(np.mean(pid == j) - p) < 3 * se


def test_gen_dataset_deterministic(task):
    a = gen_dataset(task, 64, seed=123)
    b = gen_dataset(task, 64, seed=123)
    for ta, tb in zip(a, b):
        assert np.array_equal(ta.context, tb.context)
        assert ta.prompt_id == tb.prompt_id
        assert np.array_equal(ta.target, tb.target)


def test_context_gaussian_encoder_noise(task):
    ctx = np.array([1.0, 2.0])
    g = context_gaussian(task, ctx)
    assert np.allclose(g.mean, ctx, atol=1e-15)
    assert np.allclose(g.var, task.ctx_encoder_std**2, atol=1e-15)


def test_target_matches_edit_map_plus_noise(task):
    # target - A_p c - b_p should be iid N(0, edit_noise_std^2)
    n = 50_000
    ctx, pid, tgt = gen_arrays(task, n, np.random.default_rng(6))
    resid = np.empty_like(tgt)
    for p in task.prompts:
        m = pid == p.prompt_id
        resid[m] = tgt[m] - (ctx[m] @ p.A.T + p.b)
    s = task.edit_noise_std
    assert abs(resid.mean()) < 4 * s / np.sqrt(resid.size)
    assert abs(resid.var() - s**2) < 4 * s**2 * np.sqrt(2.0 / resid.size)
