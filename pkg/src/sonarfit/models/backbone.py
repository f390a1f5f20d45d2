"""Shared convolutional backbone.

Four blocks of 3x3 same-padded convolution, batch norm, leaky ReLU
(slope 0.2) and 2x2 max pooling, with 32-32-64-64 filters. The same
topology backs the domain-adaptation net and all three few-shot heads,
so their checkpoints carry identical backbone tensor names and shapes.
A 129x372 window comes out as a (64, 8, 23) feature map, flattened to
11776 values for embedding-space methods.
"""

from __future__ import annotations

import numpy as np

from ..nn import BatchNorm2d, Conv2d, ParameterSet, Tensor, max_pool2d

FILTERS = (32, 32, 64, 64)
LEAK = 0.2


class ConvNetBackbone:
    def __init__(self, rng: np.random.Generator, dtype=np.float32):
        chans = (1,) + FILTERS
        self.dtype = dtype
        # bias-free convs: batch norm's mean subtraction cancels any bias
        self.convs = [Conv2d(chans[i], chans[i + 1], rng, dtype, bias=False)
                      for i in range(len(FILTERS))]
        self.bns = [BatchNorm2d(c, dtype) for c in FILTERS]
        self.params = ParameterSet()
        for i, (conv, bn) in enumerate(zip(self.convs, self.bns)):
            self.params.extend(f"block{i}.conv", conv.named_params())
            self.params.extend(f"block{i}.bn", bn.named_params())

    def __call__(self, x: Tensor, train: bool) -> Tensor:
        """(B, 1, H, W) -> (B, 64, H/16, W/16) feature map."""
        if x.data.ndim != 4 or x.data.shape[1] != 1:
            raise ValueError(f"backbone expects (B, 1, H, W), got {x.data.shape}")
        h = x
        for conv, bn in zip(self.convs, self.bns):
            h = max_pool2d(bn(conv(h), train=train, leak=LEAK))
        return h

    def embed(self, x: Tensor, train: bool) -> Tensor:
        """Flattened feature map, (B, C*h*w)."""
        fmap = self(x, train)
        b, c, h, w = fmap.data.shape
        return fmap.reshape((b, c * h * w))

    def embed_dim(self, in_h: int, in_w: int) -> int:
        h, w = in_h, in_w
        for _ in FILTERS:
            h, w = h // 2, w // 2
        return FILTERS[-1] * h * w

    def state_buffers(self) -> dict[str, np.ndarray]:
        out = {}
        for i, bn in enumerate(self.bns):
            for name, arr in bn.state_buffers():
                out[f"block{i}.bn.{name}"] = arr
        return out

    def load_state_buffers(self, buffers: dict[str, np.ndarray]) -> None:
        for i, bn in enumerate(self.bns):
            bn.load_buffers(
                buffers[f"block{i}.bn.running_mean"], buffers[f"block{i}.bn.running_var"]
            )
