"""Evaluation protocols: closed-set accuracy and few-shot support draws.

Few-shot evaluation embeds the support and query pools once and then
replays cheap numpy scoring for every iteration, so 100 support redraws
cost barely more than one. Supports are drawn per subject by default
(each subject personalizes the classifier with their own development
sessions); a pooled mode draws from all subjects at once.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from ..data import WindowPool
from ..models import (
    LocalNet,
    ProtoNet,
    SiameseNet,
    image_to_class_logits_np,
    normalize_descriptors_np,
    prototype_logits_np,
    siamese_scores_np,
)
from ..models.common import batched_embed
from ..nn import Tensor, no_grad
from ..sim.profiles import N_CLASSES
from .config import ExperimentConfig, config_hash


@dataclass
class ResultRow:
    method: str
    subject: str
    k_shot: int | None
    label_ratio: float | None
    seed: int
    accuracy_pct: float
    n_queries: int
    config_hash: str


@dataclass
class ResultTable:
    method: str
    config_hash: str
    rows: list[ResultRow] = field(default_factory=list)
    confusions: dict[str, np.ndarray] = field(default_factory=dict)

    def validate(self) -> None:
        for row in self.rows:
            if not 0.0 <= row.accuracy_pct <= 100.0:
                raise ValueError(f"accuracy {row.accuracy_pct} outside [0, 100]")
            if not row.config_hash:
                raise ValueError("result row missing config hash")

    def mean_accuracy(self) -> float:
        if not self.rows:
            raise ValueError("result table has no rows")
        return float(np.mean([r.accuracy_pct for r in self.rows]))

    def to_dict(self) -> dict:
        return {
            "method": self.method,
            "config_hash": self.config_hash,
            "rows": [vars(r) for r in self.rows],
            "confusions": {s: m.tolist() for s, m in self.confusions.items()},
        }

    @classmethod
    def from_dict(cls, doc: dict) -> "ResultTable":
        table = cls(
            method=doc["method"],
            config_hash=doc["config_hash"],
            rows=[ResultRow(**r) for r in doc["rows"]],
            confusions={s: np.array(m, dtype=np.int64)
                        for s, m in doc.get("confusions", {}).items()},
        )
        table.validate()
        return table


def confusion_matrix(y_true: np.ndarray, y_pred: np.ndarray, n_classes: int = N_CLASSES) -> np.ndarray:
    out = np.zeros((n_classes, n_classes), dtype=np.int64)
    np.add.at(out, (y_true, y_pred), 1)
    return out


def evaluate_closed(model, pool: WindowPool, cfg: ExperimentConfig) -> ResultTable:
    """Per-subject window accuracy plus confusion matrices."""
    if len(pool.labels) == 0:
        raise ValueError("cannot evaluate an empty pool")
    n_classes = getattr(model, "n_classes", N_CLASSES)
    if pool.labels.min() < 0 or pool.labels.max() >= n_classes:
        raise ValueError(
            f"pool labels span [{pool.labels.min()}, {pool.labels.max()}], "
            f"model expects 0..{n_classes - 1}"
        )
    table = ResultTable(method=cfg.method, config_hash=config_hash(cfg))
    for subject in sorted(pool.subject_set()):
        sub = pool.filter(subject=subject)
        preds = model.predict(sub.features)
        acc = 100.0 * float(np.mean(preds == sub.labels))
        table.rows.append(ResultRow(
            method=cfg.method, subject=subject, k_shot=None,
            label_ratio=cfg.label_ratio, seed=cfg.seed,
            accuracy_pct=acc, n_queries=len(sub.labels),
            config_hash=table.config_hash,
        ))
        table.confusions[subject] = confusion_matrix(sub.labels, preds, n_classes)
    table.validate()
    return table


def _check_session_separation(support_pool: WindowPool, query_pool: WindowPool) -> None:
    """No query window may share a (subject, session) with any support window."""
    sup = set(zip(support_pool.subjects, support_pool.sessions.tolist()))
    qry = set(zip(query_pool.subjects, query_pool.sessions.tolist()))
    shared = sup & qry
    if shared:
        raise ValueError(f"support and query pools share sessions: {sorted(shared)[:5]}")


def _embed_pool(model, pool: WindowPool) -> np.ndarray:
    """Frozen-model embeddings (or local descriptors) for a whole pool."""
    x = pool.features.astype(model.dtype)[:, None, :, :]
    if isinstance(model, LocalNet):
        def fn(t: Tensor) -> Tensor:
            return model.backbone(t, train=False)
        fmaps = batched_embed(fn, x)
        return normalize_descriptors_np(fmaps)

    def fn(t: Tensor) -> Tensor:
        return model.embed(t, train=False)
    return batched_embed(fn, x)


def _score_queries(model, q_emb: np.ndarray, s_emb: np.ndarray, s_labels: np.ndarray,
                   classes: np.ndarray) -> np.ndarray:
    """Class scores (Q, C) from cached embeddings, columns follow ``classes``."""
    if isinstance(model, ProtoNet):
        protos = np.stack([
            _canonical_mean(s_emb[s_labels == c]) for c in classes
        ])
        return prototype_logits_np(q_emb, protos)
    if isinstance(model, SiameseNet):
        means = np.stack([
            _canonical_mean(s_emb[s_labels == c]) for c in classes
        ])
        return siamese_scores_np(q_emb, means, model.phi.w.data, model.phi.b.data)
    if isinstance(model, LocalNet):
        pools = [s_emb[s_labels == c].reshape(-1, s_emb.shape[-1]) for c in classes]
        return image_to_class_logits_np(q_emb, pools, model.k)
    raise ValueError(f"few-shot evaluation does not apply to {type(model).__name__}")


def _canonical_mean(rows: np.ndarray) -> np.ndarray:
    """Mean with a fixed summation order (permutation of rows is a no-op)."""
    order = np.lexsort(rows.T[::-1])
    return np.add.reduce(rows[order], axis=0) / len(rows)


def embed_pools(model, support_pool: WindowPool, query_pool: WindowPool):
    """Precompute (support, query) pool embeddings for reuse across k values."""
    return _embed_pool(model, support_pool), _embed_pool(model, query_pool)


def evaluate_fewshot(
    model,
    support_pool: WindowPool,
    query_pool: WindowPool,
    k: int,
    cfg: ExperimentConfig,
    iterations: int | None = None,
    embeddings: tuple[np.ndarray, np.ndarray] | None = None,
) -> ResultTable:
    """Mean accuracy over repeated k-support draws, one row per subject.

    Supports come from each subject's development sessions and queries
    from their test sessions; the pools must be session-disjoint. Every
    query window is scored against all present classes each iteration.
    ``embeddings`` accepts the output of :func:`embed_pools` so several
    k values can share one forward pass.
    """
    if iterations is None:
        iterations = cfg.eval_iterations
    if iterations < 1:
        raise ValueError(f"iterations must be >= 1, got {iterations}")
    if len(query_pool.labels) == 0 or len(support_pool.labels) == 0:
        raise ValueError("cannot evaluate with an empty pool")
    _check_session_separation(support_pool, query_pool)

    classes = np.array(sorted(set(support_pool.labels.tolist())), dtype=np.int64)
    if embeddings is None:
        embeddings = embed_pools(model, support_pool, query_pool)
    sup_emb_all, qry_emb_all = embeddings
    if len(sup_emb_all) != len(support_pool.labels) or len(qry_emb_all) != len(query_pool.labels):
        raise ValueError("precomputed embeddings do not match the pools")
    sup_labels_all = support_pool.labels
    sup_subjects = np.array(support_pool.subjects)
    qry_subjects = np.array(query_pool.subjects)

    table = ResultTable(method=cfg.method, config_hash=config_hash(cfg))
    for subj_idx, subject in enumerate(sorted(query_pool.subject_set())):
        q_mask = qry_subjects == subject
        q_emb = qry_emb_all[q_mask]
        q_labels = query_pool.labels[q_mask]
        if cfg.pooled_supports:
            s_mask = np.ones(len(sup_labels_all), dtype=bool)
        else:
            s_mask = sup_subjects == subject
        s_emb = sup_emb_all[s_mask]
        s_labels = sup_labels_all[s_mask]

        per_class_idx = {}
        for c in classes:
            idx = np.nonzero(s_labels == c)[0]
            if len(idx) < k:
                raise ValueError(
                    f"subject {subject}: class {c} has {len(idx)} supports, need {k}"
                )
            per_class_idx[int(c)] = idx

        rng = np.random.default_rng([cfg.seed, k, subj_idx])
        hits = []
        for _ in range(iterations):
            chosen = np.concatenate([
                rng.choice(per_class_idx[int(c)], size=k, replace=False) for c in classes
            ])
            scores = _score_queries(model, q_emb, s_emb[chosen], s_labels[chosen], classes)
            preds = classes[np.argmax(scores, axis=1)]
            hits.append(np.mean(preds == q_labels))
        acc = 100.0 * float(np.mean(hits))

        table.rows.append(ResultRow(
            method=cfg.method, subject=subject, k_shot=k,
            label_ratio=None, seed=cfg.seed,
            accuracy_pct=acc, n_queries=int(q_mask.sum()),
            config_hash=table.config_hash,
        ))
    table.validate()
    return table


def predict_episodic(model, support_x: np.ndarray, support_y: np.ndarray,
                     query_x: np.ndarray) -> np.ndarray:
    """Single-draw class predictions from raw windows (deterministic)."""
    with no_grad():
        s_emb = _embed_pool(model, _as_pool_like(support_x))
        q_emb = _embed_pool(model, _as_pool_like(query_x))
    classes = np.array(sorted(set(np.asarray(support_y).tolist())), dtype=np.int64)
    scores = _score_queries(model, q_emb, s_emb, np.asarray(support_y), classes)
    return classes[np.argmax(scores, axis=1)]


class _FeatureOnly:
    """Duck-typed stand-in exposing just the ``features`` attribute."""

    def __init__(self, features: np.ndarray):
        self.features = features


def _as_pool_like(x: np.ndarray) -> "_FeatureOnly":
    return _FeatureOnly(np.asarray(x, dtype=np.float32))
