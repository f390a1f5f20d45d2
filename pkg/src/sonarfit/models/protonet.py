"""Prototype classifier: nearest class-mean in embedding space.

Class prototypes are the means of the support embeddings; query logits
are negative squared euclidean distances to each prototype, trained with
cross entropy over episodes.
"""

from __future__ import annotations

import numpy as np

from ..data.sampler import Episode
from ..nn import ParameterSet, Tensor, softmax_cross_entropy, transpose
from .backbone import ConvNetBackbone
from .common import save_model
from .siamese import class_mean_embeddings, embed_episode


class ProtoNet:
    def __init__(self, in_frames: int, in_bins: int, seed: int = 0, dtype=np.float32):
        rng = np.random.default_rng(seed)
        self.in_frames = in_frames
        self.in_bins = in_bins
        self.dtype = dtype
        self.backbone = ConvNetBackbone(rng, dtype)
        self.params = ParameterSet()
        self.params.extend("backbone", self.backbone.params.items())

    def embed(self, x: Tensor, train: bool) -> Tensor:
        return self.backbone.embed(x, train)

    def episode_loss(self, episode: Episode, train: bool = True) -> Tensor:
        protos, q_emb = embed_episode(self, episode, train)
        return softmax_cross_entropy(prototype_logits(q_emb, protos), episode.query_y)

    def save(self, path, train_config: dict | None = None) -> None:
        save_model(path, "protonet", self.params, self.backbone.state_buffers(),
                   train_config, extra_meta={"in_frames": self.in_frames, "in_bins": self.in_bins})

    def load_arrays(self, arrays: dict[str, np.ndarray], buffers: dict[str, np.ndarray]) -> None:
        self.params.load_arrays(arrays)
        self.backbone.load_state_buffers(buffers)


def prototype_logits(query_emb: Tensor, prototypes: Tensor) -> Tensor:
    """(Q, d) x (C, d) -> (Q, C) negative squared distances."""
    qq = (query_emb * query_emb).sum(axis=1, keepdims=True)  # (Q, 1)
    pp = (prototypes * prototypes).sum(axis=1, keepdims=True)  # (C, 1)
    cross = query_emb @ transpose(prototypes, (1, 0))  # (Q, C)
    return -(qq + transpose(pp, (1, 0)) - 2.0 * cross)


def prototype_logits_np(query_emb: np.ndarray, prototypes: np.ndarray) -> np.ndarray:
    """Numpy twin of prototype_logits for fast repeated evaluation."""
    qq = np.sum(query_emb * query_emb, axis=1, keepdims=True)
    pp = np.sum(prototypes * prototypes, axis=1)
    return -(qq + pp[None, :] - 2.0 * query_emb @ prototypes.T)


def compute_prototypes(support_emb: Tensor, n_way: int, k_shot: int) -> Tensor:
    """Per-class arithmetic means over the episode layout (training path)."""
    return class_mean_embeddings(support_emb, n_way, k_shot)


def class_prototypes_np(embeddings: np.ndarray, labels: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Per-class mean embeddings with a canonical summation order.

    Rows are lexicographically sorted before reduction, so permuting the
    supports of a class yields a bit-identical prototype. Returns
    (prototypes (C, d), sorted class ids (C,)).
    """
    classes = np.unique(labels)
    protos = np.empty((len(classes), embeddings.shape[1]), dtype=embeddings.dtype)
    for i, c in enumerate(classes):
        rows = embeddings[labels == c]
        order = np.lexsort(rows.T[::-1])
        protos[i] = np.add.reduce(rows[order], axis=0) / len(rows)
    return protos, classes
