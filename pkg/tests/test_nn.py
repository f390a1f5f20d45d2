"""Layer semantics, finite-difference gradient checks for every layer
and loss, optimizer behavior, and checkpoint round-trips."""

from __future__ import annotations

import numpy as np
import pytest

from sonarfit.nn import (
    AdamState,
    BatchNorm2d,
    BiLstm,
    Conv2d,
    DEFAULT_TOL,
    Dense,
    ParameterSet,
    Tensor,
    adam_step,
    check_gradients,
    conv2d,
    load_checkpoint,
    log_softmax,
    max_pool2d,
    mean,
    save_checkpoint,
    softmax_cross_entropy,
    softmax_np,
    sum_,
)
from sonarfit.nn.layers import batch_norm_train
from sonarfit.nn.tensor import make_op


def rng_of(seed):
    return np.random.default_rng(seed)


# -- forward semantics ---------------------------------------------------------


def test_conv2d_matches_direct_convolution():
    rng = rng_of(0)
    x = rng.standard_normal((2, 3, 5, 6))
    w = rng.standard_normal((4, 3, 3, 3))
    b = rng.standard_normal(4)
    out = conv2d(Tensor(x), Tensor(w), Tensor(b)).data
    xp = np.pad(x, ((0, 0), (0, 0), (1, 1), (1, 1)))
    ref = np.zeros((2, 4, 5, 6))
    for i in range(5):
        for j in range(6):
            patch = xp[:, :, i : i + 3, j : j + 3]
            ref[:, :, i, j] = np.einsum("nchw,fchw->nf", patch, w) + b
    np.testing.assert_allclose(out, ref, atol=1e-12)


def test_max_pool_takes_window_maxima_and_drops_odd_edge():
    x = np.arange(2 * 1 * 5 * 4, dtype=np.float64).reshape(2, 1, 5, 4)
    out = max_pool2d(Tensor(x)).data
    assert out.shape == (2, 1, 2, 2)
    np.testing.assert_allclose(out[0, 0], [[5.0, 7.0], [13.0, 15.0]])


def test_max_pool_gradient_routes_to_argmax_cell():
    x = Tensor(np.array([[[[1.0, 4.0], [2.0, 3.0]]]]), requires_grad=True)
    sum_(max_pool2d(x) * 2.0).backward()
    np.testing.assert_allclose(x.grad, [[[[0.0, 2.0], [0.0, 0.0]]]])


def test_batch_norm_train_normalizes_and_updates_running_stats():
    rng = rng_of(1)
    bn = BatchNorm2d(3)
    x = Tensor(rng.standard_normal((4, 3, 5, 5)) * 3.0 + 2.0, requires_grad=True)
    out = bn(x, train=True)
    flat = out.data.transpose(1, 0, 2, 3).reshape(3, -1)
    np.testing.assert_allclose(flat.mean(axis=1), 0.0, atol=1e-10)
    np.testing.assert_allclose(flat.std(axis=1), 1.0, atol=1e-3)
    # one update: running <- 0.9 * init + 0.1 * batch
    batch_mu = x.data.mean(axis=(0, 2, 3))
    np.testing.assert_allclose(bn.running_mean, 0.1 * batch_mu, atol=1e-12)
    assert not np.allclose(bn.running_var, 1.0)


def test_batch_norm_eval_uses_frozen_statistics():
    rng = rng_of(2)
    bn = BatchNorm2d(2)
    x = rng.standard_normal((8, 2, 4, 4))
    bn(Tensor(x), train=True)
    mu, var = bn.running_mean.copy(), bn.running_var.copy()
    y = bn(Tensor(x[:2]), train=False).data
    expected = (x[:2] - mu[:, None, None]) / np.sqrt(var[:, None, None] + bn.EPS)
    np.testing.assert_allclose(y, expected, atol=1e-10)
    np.testing.assert_allclose(bn.running_mean, mu)  # eval must not touch stats


def test_batch_norm_fused_leak_matches_separate_activation():
    rng = rng_of(3)
    x = rng.standard_normal((4, 2, 6, 6))
    bn_a, bn_b = BatchNorm2d(2), BatchNorm2d(2)
    fused = bn_a(Tensor(x), train=True, leak=0.2).data
    plain = bn_b(Tensor(x), train=True).data
    np.testing.assert_allclose(fused, np.where(plain > 0, plain, 0.2 * plain), atol=1e-12)


def test_bilstm_output_concatenates_directions():
    rng = rng_of(4)
    layer = BiLstm(5, 7, rng)
    x = Tensor(rng.standard_normal((3, 6, 5)))
    out = layer(x)
    assert out.shape == (3, 6, 14)
    with pytest.raises(ValueError):
        layer(Tensor(rng.standard_normal((3, 5))))


def test_softmax_cross_entropy_matches_manual_formula():
    rng = rng_of(5)
    logits = rng.standard_normal((6, 4))
    y = rng.integers(0, 4, size=6)
    loss = softmax_cross_entropy(Tensor(logits), y).item()
    p = softmax_np(logits)
    ref = -np.mean(np.log(p[np.arange(6), y]))
    assert abs(loss - ref) < 1e-12
    np.testing.assert_allclose(softmax_np(logits).sum(axis=1), 1.0, atol=1e-12)


def test_log_softmax_is_shift_invariant():
    rng = rng_of(6)
    z = rng.standard_normal((3, 5))
    a = log_softmax(Tensor(z)).data
    b = log_softmax(Tensor(z + 100.0)).data
    np.testing.assert_allclose(a, b, atol=1e-9)


# -- gradient checks for every layer -------------------------------------------


def check(build_loss, tensors, seed, tol=DEFAULT_TOL):
    err = check_gradients(build_loss, tensors, rng_of(seed), coords_per_tensor=8)
    assert err <= tol, f"max relative gradient error {err:.3e} > {tol:.0e}"


def test_dense_gradients():
    rng = rng_of(10)
    layer = Dense(6, 4, rng)
    x = Tensor(rng.standard_normal((5, 6)), requires_grad=True)
    y = rng.integers(0, 4, size=5)
    tensors = {"x": x, "w": layer.w, "b": layer.b}
    check(lambda: softmax_cross_entropy(layer(x), y), tensors, seed=10)


def test_conv2d_gradients_with_and_without_bias():
    rng = rng_of(11)
    for bias in (True, False):
        layer = Conv2d(2, 3, rng, bias=bias)
        x = Tensor(rng.standard_normal((2, 2, 6, 6)), requires_grad=True)
        tensors = {"x": x, "w": layer.w}
        if bias:
            tensors["b"] = layer.b
        check(lambda: mean(layer(x) ** 2), tensors, seed=11)


def test_max_pool_gradients():
    rng = rng_of(12)
    x = Tensor(rng.standard_normal((2, 2, 6, 6)), requires_grad=True)
    check(lambda: mean(max_pool2d(x) ** 2), {"x": x}, seed=12)


def test_batch_norm_gradients_plain_and_fused_leak():
    rng = rng_of(13)
    for leak in (None, 0.2):
        x = Tensor(rng.standard_normal((4, 3, 5, 5)), requires_grad=True)
        gamma = Tensor(1.0 + 0.1 * rng.standard_normal(3), requires_grad=True)
        beta = Tensor(0.1 * rng.standard_normal(3), requires_grad=True)

        def loss():
            op, _, _ = batch_norm_train(x, gamma, beta, 1e-5, leak=leak)
            return mean(op ** 2)

        check(loss, {"x": x, "gamma": gamma, "beta": beta}, seed=13)


def test_bilstm_gradients():
    rng = rng_of(14)
    layer = BiLstm(4, 3, rng)
    x = Tensor(rng.standard_normal((2, 5, 4)), requires_grad=True)
    y = rng.integers(0, 6, size=2)
    tensors = {"x": x}
    tensors.update({name: t for name, t in layer.named_params()})

    def loss():
        out = layer(x)  # (2, 5, 6)
        return softmax_cross_entropy(out[:, -1, :], y)

    check(loss, tensors, seed=14)


def test_softmax_cross_entropy_gradients():
    rng = rng_of(15)
    logits = Tensor(rng.standard_normal((6, 5)), requires_grad=True)
    y = rng.integers(0, 5, size=6)
    check(lambda: softmax_cross_entropy(logits, y), {"logits": logits}, seed=15)


def test_gradcheck_catches_a_wrong_gradient():
    x = Tensor(np.linspace(0.5, 2.0, 8), requires_grad=True)

    def loss():
        # forward x**2 but backward pretends d/dx = x (off by 2x)
        out = make_op(x.data**2, (x,), lambda g: x._accum(g * x.data))
        return sum_(out)

    err = check_gradients(loss, {"x": x}, rng_of(16), coords_per_tensor=8)
    assert err > 0.4


# -- optimizer ------------------------------------------------------------------


def test_adam_first_step_has_lr_magnitude():
    w = Tensor(np.zeros(4), requires_grad=True)
    params = ParameterSet()
    params.add("w", w)
    state = AdamState(lr=1e-2)
    w.grad = np.array([1.0, -1.0, 2.0, -3.0])
    adam_step(params, state)
    # bias-corrected first step is -lr * sign(g) regardless of |g|
    np.testing.assert_allclose(w.data, -1e-2 * np.sign([1.0, -1.0, 2.0, -3.0]), atol=1e-6)
    assert state.step_count == 1
    assert w.grad is None  # gradients are consumed by the step


def test_adam_converges_on_quadratic():
    rng = rng_of(17)
    target = rng.standard_normal(6)
    w = Tensor(np.zeros(6), requires_grad=True)
    params = ParameterSet()
    params.add("w", w)
    state = AdamState(lr=0.05)
    for _ in range(400):
        w.zero_grad()
        loss = sum_((w - target) ** 2)
        loss.backward()
        adam_step(params, state)
    np.testing.assert_allclose(w.data, target, atol=1e-3)


def test_parameter_set_rejects_duplicate_names():
    w = Tensor(np.zeros(2), requires_grad=True)
    params = ParameterSet()
    params.add("w", w)
    with pytest.raises(ValueError):
        params.add("w", w)


# -- checkpoints -----------------------------------------------------------------


def test_checkpoint_roundtrip_is_exact_for_float32(tmp_path):
    rng = rng_of(18)
    arrays = {
        "a": rng.standard_normal((3, 4)).astype(np.float32),
        "b": rng.standard_normal(7).astype(np.float32),
    }
    path = tmp_path / "model.ckpt"
    save_checkpoint(path, arrays, meta={"note": "t"})
    loaded, meta = load_checkpoint(path)
    assert set(loaded) == {"a", "b"}
    assert meta["note"] == "t"
    for k in arrays:
        assert np.array_equal(loaded[k].astype(np.float32), arrays[k])


def test_checkpoint_rejects_corrupt_file(tmp_path):
    path = tmp_path / "bad.ckpt"
    path.write_bytes(b"not a checkpoint")
    with pytest.raises((ValueError, KeyError, OSError)):
        load_checkpoint(path)
