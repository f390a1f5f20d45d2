"""Bidirectional LSTM layer built from the autodiff primitives."""

from __future__ import annotations

import numpy as np

from .tensor import Tensor, concat, sigmoid, stack, tanh
from .layers import uniform_init


class _LstmDirection:
    """One direction of an LSTM: gates laid out as [input, forget, cell, output]."""

    def __init__(self, in_dim: int, hidden: int, rng: np.random.Generator, dtype=np.float64):
        bound = 1.0 / np.sqrt(hidden)
        self.hidden = hidden
        self.wx = Tensor(uniform_init(rng, (in_dim, 4 * hidden), bound).astype(dtype), requires_grad=True)
        self.wh = Tensor(uniform_init(rng, (hidden, 4 * hidden), bound).astype(dtype), requires_grad=True)
        b = np.zeros(4 * hidden, dtype=dtype)
        b[hidden : 2 * hidden] = 1.0  # forget-gate bias
        self.b = Tensor(b, requires_grad=True)

    def run(self, steps: list[Tensor]) -> list[Tensor]:
        h_dim = self.hidden
        batch = steps[0].data.shape[0]
        dt = np.result_type(steps[0].data.dtype, self.wx.data.dtype)
        h = Tensor(np.zeros((batch, h_dim), dtype=dt))
        c = Tensor(np.zeros((batch, h_dim), dtype=dt))
        outputs = []
        for x_t in steps:
            z = x_t @ self.wx + h @ self.wh + self.b
            i = sigmoid(z[:, :h_dim])
            f = sigmoid(z[:, h_dim : 2 * h_dim])
            g = tanh(z[:, 2 * h_dim : 3 * h_dim])
            o = sigmoid(z[:, 3 * h_dim :])
            c = f * c + i * g
            h = o * tanh(c)
            outputs.append(h)
        return outputs

    def named_params(self, prefix: str):
        return [(f"{prefix}.wx", self.wx), (f"{prefix}.wh", self.wh), (f"{prefix}.b", self.b)]


class BiLstm:
    """Bidirectional LSTM over a (batch, time, features) sequence.

    Output per step is the concatenation of forward and backward hidden
    states, so the feature width doubles to 2*hidden.
    """

    def __init__(self, in_dim: int, hidden: int, rng: np.random.Generator, dtype=np.float64):
        self.in_dim = in_dim
        self.hidden = hidden
        self.fwd = _LstmDirection(in_dim, hidden, rng, dtype)
        self.bwd = _LstmDirection(in_dim, hidden, rng, dtype)

    def __call__(self, x: Tensor) -> Tensor:
        if x.ndim != 3 or x.shape[2] != self.in_dim:
            raise ValueError(f"expected (batch, time, {self.in_dim}) input, got {x.shape}")
        n_steps = x.shape[1]
        steps = [x[:, t, :] for t in range(n_steps)]
        out_f = self.fwd.run(steps)
        out_b = self.bwd.run(steps[::-1])[::-1]
        per_step = [concat([f, b], axis=1) for f, b in zip(out_f, out_b)]
        return stack(per_step, axis=1)

    def named_params(self):
        return self.fwd.named_params("fwd") + self.bwd.named_params("bwd")
