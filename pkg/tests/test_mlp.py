"""MLP forward/backward against duplicate arithmetic and finite differences."""

import numpy as np

from ecdiff.mlp import (
    LEAKY_SLOPE,
    AdamState,
    adam_step,
    backward,
    forward,
    init_mlp,
    mlp_arrays,
    mlp_from_arrays,
    mlp_from_dict,
    mlp_to_dict,
    sgd_step,
)


def fresh_adam(values):
    return AdamState(
        m=[np.zeros_like(a) for a in values],
        v=[np.zeros_like(a) for a in values],
        step=0,
    )


def flatten_params(p):
    return np.concatenate([a.ravel() for a in mlp_arrays(p)])


def with_flat(p, flat):
    arrays, k = [], 0
    for a in mlp_arrays(p):
        arrays.append(flat[k : k + a.size].reshape(a.shape))
        k += a.size
    return mlp_from_arrays(p, arrays)


def test_identity_single_layer():
    p = init_mlp([3, 3], activation="identity", rng=np.random.default_rng(0))
    p = mlp_from_arrays(p, [np.eye(3), np.zeros(3)])
    x = np.array([[0.5, -2.0, 3.0]])
    out, _ = forward(p, x)
    assert np.allclose(out, x, atol=1e-15)


def test_zero_weights_bias_only():
    p = init_mlp([4, 2], activation="identity", rng=np.random.default_rng(0))
    p = mlp_from_arrays(p, [np.zeros((2, 4)), np.array([1.5, -0.5])])
    out, _ = forward(p, np.random.default_rng(1).standard_normal((8, 4)))
    assert np.allclose(out, [1.5, -0.5], atol=1e-15)


def test_forward_matches_reimplementation(rng):
    # straight-line duplicate of the same arithmetic
    p = init_mlp([3, 5, 2], rng=rng)
    x = rng.standard_normal((7, 3))
    out, _ = forward(p, x)
    (W0, b0), (W1, b1) = p.layers
    pre = x @ W0.T + b0
    h = np.where(pre >= 0.0, pre, LEAKY_SLOPE * pre)
    want = h @ W1.T + b1
    assert np.max(np.abs(out - want)) < 1e-12


def finite_diff_check(p, x, seed):
    g_rng = np.random.default_rng(seed)
    out, tape = forward(p, x)
    og = g_rng.standard_normal(out.shape)
    pair_grads, _ = backward(p, tape, og)
    flat_g = np.concatenate([g.ravel() for dw, db in pair_grads for g in (dw, db)])
    flat_p = flatten_params(p)
    h = 1e-4
    idx = g_rng.choice(flat_p.size, size=min(80, flat_p.size), replace=False)
    worst = 0.0
    for i in idx:
        q = flat_p.copy()
        q[i] += h
        up = float(np.sum(forward(with_flat(p, q), x)[0] * og))
        q[i] -= 2 * h
        dn = float(np.sum(forward(with_flat(p, q), x)[0] * og))
        fd = (up - dn) / (2 * h)
        denom = max(abs(fd), abs(flat_g[i]), 1e-8)
        worst = max(worst, abs(fd - flat_g[i]) / denom)
    return worst


def test_gradients_finite_difference():
    # acceptance-level bound: parameters of a 2-16-16-2 net, rel err < 1e-4
    rng = np.random.default_rng(7)
    p = init_mlp([2, 16, 16, 2], rng=rng)
    x = rng.standard_normal((12, 2))
    assert finite_diff_check(p, x, seed=11) < 1e-4


def test_gradients_finite_difference_normed():
    rng = np.random.default_rng(8)
    p = init_mlp([3, 10, 10, 2], norm=True, rng=rng)
    x = rng.standard_normal((9, 3))
    assert finite_diff_check(p, x, seed=12) < 1e-4


def test_linear_gradient_is_outer_product(rng):
    p = init_mlp([3, 2], activation="identity", rng=rng)
    x = rng.standard_normal((1, 3))
    out, tape = forward(p, x)
    og = rng.standard_normal(out.shape)
    pairs, _ = backward(p, tape, og)
    gW, gb = pairs[0]
    assert np.allclose(gW, np.outer(og[0], x[0]), atol=1e-12)
    assert np.allclose(gb, og[0], atol=1e-12)


def test_zero_output_grad(rng):
    p = init_mlp([2, 6, 2], rng=rng)
    x = rng.standard_normal((4, 2))
    _, tape = forward(p, x)
    pair_grads, gx = backward(p, tape, np.zeros((4, 2)))
    assert all(np.all(dw == 0.0) and np.all(db == 0.0) for dw, db in pair_grads)
    assert np.all(gx == 0.0)


def test_lr_zero_no_change(rng):
    p = init_mlp([2, 4, 1], rng=rng)
    x = rng.standard_normal((3, 2))
    _, tape = forward(p, x)
    pair_grads, _ = backward(p, tape, np.ones((3, 1)))
    q = sgd_step(p, pair_grads, 0.0, fresh_adam(mlp_arrays(p)))
    for a, b in zip(mlp_arrays(p), mlp_arrays(q)):
        assert np.array_equal(a, b)


def test_descent_on_square():
    # f(w) = w^2 from w=1: one step must shrink |w|
    vals = [np.array([[1.0]])]
    grads = [np.array([[2.0]])]
    new = adam_step(vals, grads, 0.1, fresh_adam(vals))
    assert abs(new[0][0, 0]) < 1.0


def test_adam_reaches_quadratic_minimum():
    # 200 steps on f(w) = 0.5 ||w - w*||^2 in 2D
    target = np.array([0.3, -1.2])
    vals = [np.array([2.0, 2.0])]
    st = fresh_adam(vals)
    for _ in range(200):
        vals = adam_step(vals, [vals[0] - target], 0.05, st)
    assert np.max(np.abs(vals[0] - target)) < 1e-3


def test_serialization_roundtrip(rng):
    p = init_mlp([4, 8, 3], norm=True, rng=rng)
    q = mlp_from_dict(mlp_to_dict(p))
    assert q.activation == p.activation and q.norm == p.norm
    for a, b in zip(mlp_arrays(p), mlp_arrays(q)):
        assert np.array_equal(a, b)


def test_final_scale_zero_head(rng):
    p = init_mlp([2, 8, 2], rng=rng, final_scale=0.0)
    out, _ = forward(p, rng.standard_normal((5, 2)))
    assert np.allclose(out, 0.0, atol=1e-15)
