"""Differentiable layers: dense, 3x3 same-padded conv, 2x2 max-pool, batch norm.

Conv kernels are fixed at 3x3 / stride 1 / same padding and pooling at
2x2 / stride 2, matching the single backbone family used by every model.
The conv implementation chunks the batch internally so the im2col buffer
stays bounded regardless of batch size.
"""

from __future__ import annotations

import numpy as np

from .tensor import Tensor, as_tensor, make_op

# im2col working-set budget per chunk, in float64 elements
_COL_BUDGET = 16_000_000


def he_normal(rng: np.random.Generator, shape: tuple, fan_in: int) -> np.ndarray:
    return rng.normal(0.0, np.sqrt(2.0 / fan_in), size=shape)


def uniform_init(rng: np.random.Generator, shape: tuple, bound: float) -> np.ndarray:
    return rng.uniform(-bound, bound, size=shape)


# -- conv2d --------------------------------------------------------------------


def _im2col(xp: np.ndarray) -> np.ndarray:
    """(n, C, H+2, W+2) padded input -> (n*H*W, C*9) patch matrix."""
    n, c, hp, wp = xp.shape
    h, w = hp - 2, wp - 2
    s0, s1, s2, s3 = xp.strides
    view = np.lib.stride_tricks.as_strided(
        xp, shape=(n, c, h, w, 3, 3), strides=(s0, s1, s2, s3, s2, s3), writeable=False
    )
    return np.ascontiguousarray(view.transpose(0, 2, 3, 1, 4, 5)).reshape(n * h * w, c * 9)


def _conv_chunks(n: int, c: int, h: int, w: int) -> int:
    per_sample = h * w * c * 9
    return max(1, _COL_BUDGET // max(1, per_sample))


def _conv_forward_data(x: np.ndarray, w: np.ndarray, b: np.ndarray | None) -> np.ndarray:
    n, c, h, wd = x.shape
    f = w.shape[0]
    wmat = w.reshape(f, c * 9).T
    xp = np.pad(x, ((0, 0), (0, 0), (1, 1), (1, 1)))
    out = np.empty((n, f, h, wd), dtype=np.result_type(x.dtype, w.dtype))
    step = _conv_chunks(n, c, h, wd)
    for lo in range(0, n, step):
        hi = min(n, lo + step)
        cols = _im2col(xp[lo:hi])
        y = cols @ wmat
        if b is not None:
            y += b
        out[lo:hi] = y.reshape(hi - lo, h, wd, f).transpose(0, 3, 1, 2)
    return out


def conv2d(x, w, b=None) -> Tensor:
    """3x3 same-padded stride-1 convolution.

    x: (N, C, H, W), w: (F, C, 3, 3), b: (F,) or None to skip the bias
    (redundant when batch norm follows). Output (N, F, H, W).
    """
    x, w = as_tensor(x), as_tensor(w)
    if b is not None:
        b = as_tensor(b)
    n, c, h, wd = x.data.shape
    f, cw, kh, kw = w.data.shape
    if cw != c or kh != 3 or kw != 3:
        raise ValueError(f"conv2d kernel {w.data.shape} incompatible with input {x.data.shape}")
    out_data = _conv_forward_data(x.data, w.data, None if b is None else b.data)

    def backward(g):
        if b is not None:
            b._accum(g.sum(axis=(0, 2, 3)))
        if w.requires_grad:
            # dW = cols^T @ g, recomputing im2col per chunk to bound memory
            xp = np.pad(x.data, ((0, 0), (0, 0), (1, 1), (1, 1)))
            dw = np.zeros((c * 9, f), dtype=w.data.dtype)
            step = _conv_chunks(n, c, h, wd)
            for lo in range(0, n, step):
                hi = min(n, lo + step)
                cols = _im2col(xp[lo:hi])
                gm = g[lo:hi].transpose(0, 2, 3, 1).reshape((hi - lo) * h * wd, f)
                dw += cols.T @ gm
            w._accum(dw.T.reshape(f, c, 3, 3))
        if x.requires_grad:
            # dX = g convolved with the flipped, channel-transposed kernel
            w_flip = w.data[:, :, ::-1, ::-1].transpose(1, 0, 2, 3)
            x._accum(_conv_forward_data(g, np.ascontiguousarray(w_flip), None))

    parents = (x, w) if b is None else (x, w, b)
    return make_op(out_data, parents, backward)


# -- max pooling -----------------------------------------------------------------


def max_pool2d(x) -> Tensor:
    """2x2 stride-2 max pooling; trailing odd row/col dropped.

    Gradient goes to the first maximal cell in row-major order within
    each window (ties broken to the lowest flat index).
    """
    x = as_tensor(x)
    n, c, h, w = x.data.shape
    h2, w2 = h // 2, w // 2
    if h2 == 0 or w2 == 0:
        raise ValueError(f"max_pool2d input too small: {x.data.shape}")
    crop = x.data[:, :, : h2 * 2, : w2 * 2]
    tiles = crop.reshape(n, c, h2, 2, w2, 2).transpose(0, 1, 2, 4, 3, 5).reshape(n, c, h2, w2, 4)
    idx64 = tiles.argmax(axis=-1)
    out_data = np.take_along_axis(tiles, idx64[..., None], axis=-1)[..., 0]
    idx = idx64.astype(np.int8)  # values 0..3; shrinks what backward keeps alive

    def backward(g):
        if not x.requires_grad:
            return
        if x.grad is None:
            x.grad = np.zeros_like(x.data)
        ni, ci, hi, wi = np.indices(idx.shape, sparse=True)
        rows = hi * 2 + idx // 2
        cols = wi * 2 + idx % 2
        # window winners are unique target cells, so fancy += is safe
        x.grad[ni, ci, rows, cols] += g

    return make_op(out_data, (x,), backward)


# -- parameterized layers ----------------------------------------------------------


class Dense:
    """Affine layer y = x @ W + b with He-normal weight init."""

    def __init__(self, in_dim: int, out_dim: int, rng: np.random.Generator, dtype=np.float64):
        self.w = Tensor(he_normal(rng, (in_dim, out_dim), in_dim).astype(dtype), requires_grad=True)
        self.b = Tensor(np.zeros(out_dim, dtype=dtype), requires_grad=True)

    def __call__(self, x: Tensor) -> Tensor:
        return x @ self.w + self.b

    def named_params(self):
        return [("w", self.w), ("b", self.b)]


class Conv2d:
    def __init__(self, in_ch: int, out_ch: int, rng: np.random.Generator,
                 dtype=np.float64, bias: bool = True):
        fan_in = in_ch * 9
        self.w = Tensor(he_normal(rng, (out_ch, in_ch, 3, 3), fan_in).astype(dtype), requires_grad=True)
        self.b = Tensor(np.zeros(out_ch, dtype=dtype), requires_grad=True) if bias else None

    def __call__(self, x: Tensor) -> Tensor:
        return conv2d(x, self.w, self.b)

    def named_params(self):
        if self.b is None:
            return [("w", self.w)]
        return [("w", self.w), ("b", self.b)]


def batch_norm_train(
    x: Tensor, gamma: Tensor, beta: Tensor, eps: float, leak: float | None = None
) -> tuple[Tensor, np.ndarray, np.ndarray]:
    """Fused batch-norm training op over axes (0, 2, 3), with an optional
    fused leaky-ReLU on the output.

    A single graph node keeps only the normalized activations alive for
    backward instead of the five intermediates of the unfused chain;
    that is what makes full conv batches fit in memory. The activation
    mask is recovered from the output's sign (leaky ReLU preserves it),
    so fusing it costs no extra buffer. Returns (output, batch mean,
    batch var) with the statistics detached.
    """
    axes = (0, 2, 3)
    mu = x.data.mean(axis=axes, keepdims=True)
    var = x.data.var(axis=axes, keepdims=True)
    inv = 1.0 / np.sqrt(var + eps)
    xn = (x.data - mu) * inv
    g4 = gamma.data.reshape(1, -1, 1, 1)
    out_data = g4 * xn + beta.data.reshape(1, -1, 1, 1)
    if leak is not None:
        np.multiply(out_data, leak, out=out_data, where=out_data <= 0)

    def backward(g):
        if leak is not None:
            g = np.where(out_data > 0, g, g * leak)
        gamma._accum(np.sum(g * xn, axis=axes))
        beta._accum(np.sum(g, axis=axes))
        if x.requires_grad:
            dxn = g * g4
            x._accum(
                inv
                * (
                    dxn
                    - dxn.mean(axis=axes, keepdims=True)
                    - xn * (dxn * xn).mean(axis=axes, keepdims=True)
                )
            )

    return make_op(out_data, (x, gamma, beta), backward), mu.ravel(), var.ravel()


class BatchNorm2d:
    """Per-channel batch normalization over (N, H, W).

    Training mode normalizes with batch statistics and updates running
    buffers with momentum 0.9; inference mode is the per-channel affine
    map defined by the frozen running statistics.
    """

    MOMENTUM = 0.9
    EPS = 1e-5

    def __init__(self, channels: int, dtype=np.float64):
        self.gamma = Tensor(np.ones(channels, dtype=dtype), requires_grad=True)
        self.beta = Tensor(np.zeros(channels, dtype=dtype), requires_grad=True)
        self.running_mean = np.zeros(channels, dtype=dtype)
        self.running_var = np.ones(channels, dtype=dtype)

    def __call__(self, x: Tensor, train: bool, leak: float | None = None) -> Tensor:
        c = self.gamma.data.shape[0]
        if train:
            out, mu, var = batch_norm_train(x, self.gamma, self.beta, self.EPS, leak)
            dt = self.running_mean.dtype
            self.running_mean = (self.MOMENTUM * self.running_mean
                                 + (1 - self.MOMENTUM) * mu).astype(dt)
            self.running_var = (self.MOMENTUM * self.running_var
                                + (1 - self.MOMENTUM) * var).astype(dt)
            return out
        from .tensor import leaky_relu

        dt = x.data.dtype
        mu = self.running_mean.astype(dt).reshape(1, c, 1, 1)
        sd = np.sqrt(self.running_var + self.EPS).astype(dt).reshape(1, c, 1, 1)
        gamma = self.gamma.reshape((1, c, 1, 1))
        beta = self.beta.reshape((1, c, 1, 1))
        out = gamma * ((x - mu) / sd) + beta
        return out if leak is None else leaky_relu(out, leak)

    def named_params(self):
        return [("gamma", self.gamma), ("beta", self.beta)]

    def state_buffers(self):
        return [("running_mean", self.running_mean), ("running_var", self.running_var)]

    def load_buffers(self, mean: np.ndarray, var: np.ndarray):
        dt = self.gamma.data.dtype
        self.running_mean = mean.astype(dt).copy()
        self.running_var = var.astype(dt).copy()
