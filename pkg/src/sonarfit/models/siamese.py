"""Siamese similarity classifier over backbone embeddings.

A query is compared against each class's mean support embedding through
delta = sigmoid(phi(|query - mean|)) with phi a trained dense layer; the
per-class deltas are softmax-normalized and scored by negative log
likelihood during episodic training.
"""

from __future__ import annotations

import numpy as np

from ..data.sampler import Episode
from ..nn import Dense, ParameterSet, Tensor, abs_, concat, no_grad, sigmoid, softmax_cross_entropy
from .backbone import ConvNetBackbone
from .common import save_model

SCORE_CHUNK = 48


class SiameseNet:
    def __init__(self, in_frames: int, in_bins: int, seed: int = 0, dtype=np.float32):
        rng = np.random.default_rng(seed)
        self.in_frames = in_frames
        self.in_bins = in_bins
        self.dtype = dtype
        self.backbone = ConvNetBackbone(rng, dtype)
        emb = self.backbone.embed_dim(in_frames, in_bins)
        self.phi = Dense(emb, 1, rng, dtype)
        self.params = ParameterSet()
        self.params.extend("backbone", self.backbone.params.items())
        self.params.extend("phi", self.phi.named_params())

    def embed(self, x: Tensor, train: bool) -> Tensor:
        return self.backbone.embed(x, train)

    def scores(self, query_emb: Tensor, class_means: Tensor) -> Tensor:
        """delta matrix (Q, C): sigmoid(phi(|q - mean_c|)) per pair."""
        q_n, d = query_emb.data.shape
        c_n = class_means.data.shape[0]
        means3 = class_means.reshape((1, c_n, d))
        chunks = []
        for c0 in range(0, q_n, SCORE_CHUNK):
            q = query_emb[c0 : min(c0 + SCORE_CHUNK, q_n)]
            k = q.data.shape[0]
            diff = abs_(q.reshape((k, 1, d)) - means3)  # (k, C, d)
            delta = sigmoid(self.phi(diff.reshape((k * c_n, d))))
            chunks.append(delta.reshape((k, c_n)))
        return concat(chunks, axis=0)

    def episode_loss(self, episode: Episode, train: bool = True) -> Tensor:
        """NLL of softmax-normalized deltas over one episode."""
        means, q_emb = embed_episode(self, episode, train)
        return softmax_cross_entropy(self.scores(q_emb, means), episode.query_y)

    def save(self, path, train_config: dict | None = None) -> None:
        save_model(path, "siamese", self.params, self.backbone.state_buffers(),
                   train_config, extra_meta={"in_frames": self.in_frames, "in_bins": self.in_bins})

    def load_arrays(self, arrays: dict[str, np.ndarray], buffers: dict[str, np.ndarray]) -> None:
        self.params.load_arrays(arrays)
        self.backbone.load_state_buffers(buffers)


def class_mean_embeddings(support_emb: Tensor, n_way: int, k_shot: int) -> Tensor:
    """(N*K, d) support embeddings, grouped by class, -> (N, d) means."""
    d = support_emb.data.shape[1]
    return support_emb.reshape((n_way, k_shot, d)).mean(axis=1)


def embed_episode(model, episode: Episode, train: bool) -> tuple[Tensor, Tensor]:
    """One joint forward over supports and queries; returns
    (class mean embeddings (N, d), query embeddings (Q, d))."""
    n_way = episode.n_way
    k_shot = episode.support_x.shape[0] // n_way
    x = np.concatenate([episode.support_x, episode.query_x]).astype(model.dtype)[:, None, :, :]
    emb = model.embed(Tensor(x), train=train)
    s_emb = emb[: len(episode.support_x)]
    q_emb = emb[len(episode.support_x):]
    return class_mean_embeddings(s_emb, n_way, k_shot), q_emb


def siamese_scores_np(q_emb: np.ndarray, means: np.ndarray, w: np.ndarray, b: np.ndarray) -> np.ndarray:
    """Numpy twin of SiameseNet.scores for fast repeated evaluation."""
    out = np.empty((len(q_emb), len(means)))
    wv = w.reshape(-1)
    for c in range(len(means)):
        out[:, c] = np.abs(q_emb - means[c]) @ wv + float(b.reshape(-1)[0])
    return 1.0 / (1.0 + np.exp(-out))
