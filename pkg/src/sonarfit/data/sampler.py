"""Samplers shared by all training methods.

Both samplers take an explicit ``numpy.random.Generator`` and advance
it; there is no hidden global state, so a run is reproducible from the
seed that created the generator.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..sim.profiles import N_CLASSES
from .pool import WindowPool


@dataclass(frozen=True)
class Episode:
    """One N-way-K-shot episode with episode-local labels 0..N-1."""

    support_x: np.ndarray  # (N*K, frames, bins)
    support_y: np.ndarray  # (N*K,) local labels
    query_x: np.ndarray  # (N*Q, frames, bins)
    query_y: np.ndarray  # (N*Q,) local labels
    class_ids: np.ndarray  # (N,) original class ids, class_ids[local] = original

    @property
    def n_way(self) -> int:
        return len(self.class_ids)

    def validate(self, k_shot: int, q_query: int) -> None:
        n = self.n_way
        if self.support_x.shape[0] != n * k_shot or self.query_x.shape[0] != n * q_query:
            raise ValueError("episode size does not match N*K / N*Q")
        for local in range(n):
            if np.sum(self.support_y == local) != k_shot:
                raise ValueError(f"class {local}: support count != {k_shot}")
            if np.sum(self.query_y == local) != q_query:
                raise ValueError(f"class {local}: query count != {q_query}")
        if len(np.unique(self.class_ids)) != n:
            raise ValueError("episode classes must be distinct")


def sample_class_balanced_batch(
    pool: WindowPool,
    rng: np.random.Generator,
    per_class: int = 15,
    n_classes: int = N_CLASSES,
) -> tuple[np.ndarray, np.ndarray]:
    """Batch with exactly ``per_class`` windows of each class, shuffled.

    Draws are without replacement within the batch; a class with fewer
    than ``per_class`` windows is an error.
    """
    by_class = pool.class_indices()
    picks = []
    for c in range(n_classes):
        idx = by_class.get(c, np.empty(0, dtype=np.int64))
        if len(idx) < per_class:
            raise ValueError(f"class {c} has {len(idx)} windows; need >= {per_class}")
        picks.append(rng.choice(idx, size=per_class, replace=False))
    order = rng.permutation(n_classes * per_class)
    flat = np.concatenate(picks)[order]
    return pool.features[flat], pool.labels[flat]


def sample_episode(
    pool: WindowPool,
    rng: np.random.Generator,
    n_way: int,
    k_shot: int,
    q_query: int,
) -> Episode:
    """Draw N classes, then K support + Q query windows per class,
    disjoint within the episode."""
    by_class = pool.class_indices()
    present = np.array(sorted(by_class), dtype=np.int64)
    if len(present) < n_way:
        raise ValueError(f"pool has {len(present)} classes; need {n_way}")
    class_ids = np.sort(rng.choice(present, size=n_way, replace=False))

    support_x, support_y, query_x, query_y = [], [], [], []
    for local, cid in enumerate(class_ids):
        idx = by_class[int(cid)]
        if len(idx) < k_shot + q_query:
            raise ValueError(
                f"class {cid} has {len(idx)} windows; need k+q = {k_shot + q_query}"
            )
        chosen = rng.choice(idx, size=k_shot + q_query, replace=False)
        support_x.append(pool.features[chosen[:k_shot]])
        query_x.append(pool.features[chosen[k_shot:]])
        support_y.append(np.full(k_shot, local, dtype=np.int64))
        query_y.append(np.full(q_query, local, dtype=np.int64))

    episode = Episode(
        support_x=np.concatenate(support_x),
        support_y=np.concatenate(support_y),
        query_x=np.concatenate(query_x),
        query_y=np.concatenate(query_y),
        class_ids=class_ids,
    )
    episode.validate(k_shot, q_query)
    return episode
