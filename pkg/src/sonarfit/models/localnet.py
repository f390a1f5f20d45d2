"""Local-descriptor classifier: image-to-class cosine similarity.

The backbone's final feature map is read as a grid of d-dimensional
local descriptors (one per spatial cell). For a query, each descriptor
finds its k most cosine-similar descriptors in the pooled support
descriptors of a class; the class logit is the sum of those top-k
similarities over all query descriptors. Neighbor selection is by index
on detached values, but the selected similarities are gathered through
the graph, so gradients flow into both query and support embeddings.
"""

from __future__ import annotations

import numpy as np

from ..data.sampler import Episode
from ..nn import ParameterSet, Tensor, concat, sqrt, stack, transpose, softmax_cross_entropy
from .backbone import ConvNetBackbone
from .common import save_model

TOP_K = 3
_QUERY_CHUNK = 16


class LocalNet:
    def __init__(self, in_frames: int, in_bins: int, seed: int = 0, k: int = TOP_K, dtype=np.float32):
        if k < 1:
            raise ValueError(f"neighbor count k must be >= 1, got {k}")
        rng = np.random.default_rng(seed)
        self.in_frames = in_frames
        self.in_bins = in_bins
        self.k = k
        self.dtype = dtype
        self.backbone = ConvNetBackbone(rng, dtype)
        self.params = ParameterSet()
        self.params.extend("backbone", self.backbone.params.items())

    def descriptors(self, x: Tensor, train: bool) -> Tensor:
        """(B, 1, H, W) -> (B, P, d) unit-norm local descriptors."""
        fmap = self.backbone(x, train)  # (B, C, h, w)
        b, c, h, w = fmap.data.shape
        desc = transpose(fmap, (0, 2, 3, 1)).reshape((b, h * w, c))
        norm = sqrt((desc * desc).sum(axis=2, keepdims=True) + 1e-12)
        return desc / norm

    def episode_loss(self, episode: Episode, train: bool = True) -> Tensor:
        n_way = episode.n_way
        k_shot = episode.support_x.shape[0] // n_way
        x = np.concatenate([episode.support_x, episode.query_x]).astype(self.dtype)[:, None, :, :]
        desc = self.descriptors(Tensor(x), train)
        n_support = len(episode.support_x)
        s_desc, q_desc = desc[:n_support], desc[n_support:]
        logits = image_to_class_logits(q_desc, s_desc, n_way, k_shot, self.k)
        return softmax_cross_entropy(logits, episode.query_y)

    def save(self, path, train_config: dict | None = None) -> None:
        save_model(path, "localnet", self.params, self.backbone.state_buffers(),
                   train_config,
                   extra_meta={"in_frames": self.in_frames, "in_bins": self.in_bins, "k": self.k})

    def load_arrays(self, arrays: dict[str, np.ndarray], buffers: dict[str, np.ndarray]) -> None:
        self.params.load_arrays(arrays)
        self.backbone.load_state_buffers(buffers)


def _topk_sum(sims: Tensor, k: int) -> Tensor:
    """Per-row sum of the k largest entries of a 2-D similarity tensor."""
    n, m = sims.data.shape
    if m < k:
        raise ValueError(f"descriptor pool of {m} smaller than k={k}")
    top = np.argpartition(sims.data, m - k, axis=1)[:, m - k:]
    rows = np.arange(n)[:, None]
    return sims[rows, top].sum(axis=1)


def image_to_class_logits(
    q_desc: Tensor, s_desc: Tensor, n_way: int, k_shot: int, k: int
) -> Tensor:
    """(Q, P, d) query and (N*K, P, d) support descriptors -> (Q, N) logits.

    Support descriptors are pooled per class (class-grouped episode
    layout), and every query descriptor contributes the sum of its top-k
    cosine similarities within each class pool.
    """
    qn, p, d = q_desc.data.shape
    q_flat = q_desc.reshape((qn * p, d))
    class_logits = []
    for c in range(n_way):
        pool = s_desc[c * k_shot : (c + 1) * k_shot].reshape((k_shot * p, d))
        pool_t = transpose(pool, (1, 0))
        per_chunk = []
        step = _QUERY_CHUNK * p
        for lo in range(0, qn * p, step):
            sims = q_flat[lo : min(lo + step, qn * p)] @ pool_t  # rows in [-1, 1]
            per_chunk.append(_topk_sum(sims, k))
        scores = concat(per_chunk, axis=0).reshape((qn, p))
        class_logits.append(scores.sum(axis=1))
    return transpose(stack(class_logits, axis=0), (1, 0))  # (Q, N)


def normalize_descriptors_np(fmap: np.ndarray) -> np.ndarray:
    """(B, C, h, w) feature maps -> (B, h*w, C) unit descriptors (numpy)."""
    b, c, h, w = fmap.shape
    desc = fmap.transpose(0, 2, 3, 1).reshape(b, h * w, c)
    norm = np.sqrt(np.sum(desc * desc, axis=2, keepdims=True) + 1e-12)
    return desc / norm


def image_to_class_logits_np(
    q_desc: np.ndarray, class_pools: list[np.ndarray], k: int
) -> np.ndarray:
    """Numpy twin of image_to_class_logits against explicit class pools."""
    qn, p, d = q_desc.shape
    q_flat = q_desc.reshape(qn * p, d)
    out = np.empty((qn, len(class_pools)))
    for c, pool in enumerate(class_pools):
        if len(pool) < k:
            raise ValueError(f"class {c} pool of {len(pool)} smaller than k={k}")
        sims = q_flat @ pool.T
        m = sims.shape[1]
        top = np.partition(sims, m - k, axis=1)[:, m - k:]
        out[:, c] = top.sum(axis=1).reshape(qn, p).sum(axis=1)
    return out
