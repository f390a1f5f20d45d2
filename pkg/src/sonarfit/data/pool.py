"""Immutable window pools that feed the samplers and models."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from ..dsp.windows import SampleWindow, instance_normalize
from ..sim.profiles import N_CLASSES


@dataclass(frozen=True)
class WindowPool:
    """Stacked per-window features plus provenance columns.

    Features are instance-normalized at construction unless told
    otherwise; pools are never mutated after that, so samplers can share
    them freely.
    """

    features: np.ndarray  # (n, frames, bins) float32
    labels: np.ndarray  # (n,) int64
    subjects: tuple[str, ...]
    domains: tuple[str, ...]
    sessions: np.ndarray  # (n,) int64
    normalized: bool = True

    @classmethod
    def from_windows(cls, windows: list[SampleWindow], normalize: bool = True) -> "WindowPool":
        if not windows:
            raise ValueError("cannot build a pool from zero windows")
        feats = np.stack(
            [instance_normalize(w.values) if normalize else w.values.astype(np.float32) for w in windows]
        )
        return cls(
            features=feats,
            labels=np.array([w.label for w in windows], dtype=np.int64),
            subjects=tuple(w.subject for w in windows),
            domains=tuple(w.domain for w in windows),
            sessions=np.array([w.session for w in windows], dtype=np.int64),
            normalized=normalize,
        )

    def __len__(self) -> int:
        return len(self.labels)

    def subset(self, idx: np.ndarray) -> "WindowPool":
        idx = np.asarray(idx, dtype=np.int64)
        return WindowPool(
            features=self.features[idx],
            labels=self.labels[idx],
            subjects=tuple(self.subjects[i] for i in idx),
            domains=tuple(self.domains[i] for i in idx),
            sessions=self.sessions[idx],
            normalized=self.normalized,
        )

    def filter(
        self,
        subject: str | None = None,
        domain: str | None = None,
        session_in: set[int] | None = None,
        label_in: set[int] | None = None,
    ) -> "WindowPool":
        mask = np.ones(len(self), dtype=bool)
        if subject is not None:
            mask &= np.array([s == subject for s in self.subjects])
        if domain is not None:
            mask &= np.array([d == domain for d in self.domains])
        if session_in is not None:
            mask &= np.isin(self.sessions, sorted(session_in))
        if label_in is not None:
            mask &= np.isin(self.labels, sorted(label_in))
        return self.subset(np.nonzero(mask)[0])

    def class_indices(self) -> dict[int, np.ndarray]:
        return {int(c): np.nonzero(self.labels == c)[0] for c in np.unique(self.labels)}

    def class_counts(self) -> dict[int, int]:
        return {c: len(ix) for c, ix in self.class_indices().items()}

    def subject_set(self) -> list[str]:
        return sorted(set(self.subjects))

    def require_min_per_class(self, minimum: int, classes: list[int] | None = None) -> None:
        counts = self.class_counts()
        classes = list(range(N_CLASSES)) if classes is None else classes
        short = {c: counts.get(c, 0) for c in classes if counts.get(c, 0) < minimum}
        if short:
            raise ValueError(f"classes below {minimum} windows: {short}")


def merge_pools(pools: list[WindowPool]) -> WindowPool:
    if not pools:
        raise ValueError("nothing to merge")
    if len({p.normalized for p in pools}) != 1:
        raise ValueError("cannot merge pools with mixed normalization")
    return WindowPool(
        features=np.concatenate([p.features for p in pools]),
        labels=np.concatenate([p.labels for p in pools]),
        subjects=tuple(s for p in pools for s in p.subjects),
        domains=tuple(d for p in pools for d in p.domains),
        sessions=np.concatenate([p.sessions for p in pools]),
        normalized=pools[0].normalized,
    )
