"""Training loops for all five methods.

One epoch is one optimizer step on a freshly drawn batch or episode,
which keeps the published epoch counts meaningful for every method. The
loop is deterministic given (config, seed): all randomness flows through
a single generator seeded from the config seed.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from ..data import DatasetSplit, WindowPool, sample_class_balanced_batch, sample_episode
from ..models import (
    BaselineBiLstm,
    DomainAdaptationNet,
    LocalNet,
    ProtoNet,
    SiameseNet,
    da_loss,
    mask_target_labels,
)
from ..nn.optim import AdamState, adam_step
from ..sim.profiles import N_CLASSES
from .config import EPISODIC_METHODS, ExperimentConfig, config_hash


@dataclass
class TrainResult:
    config: ExperimentConfig
    model: object
    history: dict[str, list[float]] = field(default_factory=dict)
    checkpoint_path: Path | None = None


def build_model(cfg: ExperimentConfig, in_frames: int, in_bins: int):
    """Fresh, untrained model of the configured method."""
    if cfg.method == "baseline":
        return BaselineBiLstm(in_bins, seed=cfg.seed)
    if cfg.method == "da":
        return DomainAdaptationNet(in_frames, in_bins, seed=cfg.seed)
    if cfg.method == "siamese":
        return SiameseNet(in_frames, in_bins, seed=cfg.seed)
    if cfg.method == "proto":
        return ProtoNet(in_frames, in_bins, seed=cfg.seed)
    if cfg.method == "local":
        return LocalNet(in_frames, in_bins, seed=cfg.seed)
    raise ValueError(f"unknown method {cfg.method!r}")


def _check_finite(value: float, epoch: int) -> float:
    if not math.isfinite(value):
        raise FloatingPointError(f"non-finite loss {value} at epoch {epoch}")
    return value


def _train_closed(cfg, model, pool: WindowPool, rng, state, history):
    for epoch in range(cfg.epochs):
        x, y = sample_class_balanced_batch(pool, rng, per_class=cfg.per_class)
        loss = model.loss(x, y)
        history["loss"].append(_check_finite(loss.item(), epoch))
        loss.backward()
        adam_step(model.params, state)


def _train_da(cfg, model, source: WindowPool, target: WindowPool, rng, state, history):
    for epoch in range(cfg.epochs):
        xs, ys = sample_class_balanced_batch(source, rng, per_class=cfg.per_class)
        xt, yt = sample_class_balanced_batch(target, rng, per_class=cfg.per_class)
        yt_partial = mask_target_labels(yt, cfg.label_ratio, rng)
        loss, parts = da_loss(
            model, xs, ys, xt, yt_partial,
            label_ratio=cfg.label_ratio,
            mmd_weight=cfg.mmd_weight,
            allow_any_ratio=cfg.allow_any_ratio,
        )
        history["loss"].append(_check_finite(loss.item(), epoch))
        for key in ("ce_source", "ce_target", "mmd"):
            history[key].append(float(parts[key]))
        loss.backward()
        adam_step(model.params, state)


def _train_episodic(cfg, model, pool: WindowPool, rng, state, history):
    for epoch in range(cfg.epochs):
        episode = sample_episode(pool, rng, cfg.n_way, cfg.k_shot, cfg.q_query)
        loss = model.episode_loss(episode)
        history["loss"].append(_check_finite(loss.item(), epoch))
        loss.backward()
        adam_step(model.params, state)


def train(cfg: ExperimentConfig, split: DatasetSplit) -> TrainResult:
    """Train per the config's protocol and optionally write a checkpoint.

    The baseline and the episodic methods train on lab-domain windows
    only; domain adaptation additionally consumes the subject-development
    pool as its (partially labeled) target.
    """
    cfg.validate()
    pool = split.basic_training
    _, in_frames, in_bins = pool.features.shape
    model = build_model(cfg, in_frames, in_bins)
    rng = np.random.default_rng(cfg.seed)
    state = AdamState(lr=cfg.lr)

    history: dict[str, list[float]] = {"loss": []}
    if cfg.method == "da":
        history.update({"ce_source": [], "ce_target": [], "mmd": []})

    if cfg.method == "baseline":
        _train_closed(cfg, model, pool, rng, state, history)
    elif cfg.method == "da":
        _train_da(cfg, model, pool, split.subject_development, rng, state, history)
    elif cfg.method in EPISODIC_METHODS:
        _train_episodic(cfg, model, pool, rng, state, history)

    checkpoint_path = None
    if cfg.out_dir is not None:
        out_dir = Path(cfg.out_dir)
        out_dir.mkdir(parents=True, exist_ok=True)
        tag = config_hash(cfg)
        checkpoint_path = out_dir / f"{cfg.method}-{tag}.ckpt"
        model.save(checkpoint_path, train_config=cfg.to_dict())
        log_path = out_dir / f"{cfg.method}-{tag}.history.json"
        log_path.write_text(json.dumps(history, sort_keys=True) + "\n")

    return TrainResult(config=cfg, model=model, history=history,
                       checkpoint_path=checkpoint_path)


def load_trained(path, in_frames: int, in_bins: int):
    """Rebuild a model of the checkpointed method and load its weights."""
    from ..models.common import load_model_arrays

    arrays, buffers, meta = load_model_arrays(path)
    method = {
        "baseline_bilstm": "baseline",
        "domain_adaptation": "da",
        "siamese": "siamese",
        "protonet": "proto",
        "localnet": "local",
    }.get(meta.get("method"))
    if method is None:
        raise ValueError(f"{path}: unrecognized model card method {meta.get('method')!r}")
    cfg = ExperimentConfig(method=method, epochs=0, lr=1e-3,
                           label_ratio=1.0 if method == "da" else None)
    model = build_model(cfg, in_frames, in_bins)
    if method == "baseline":
        model.load_arrays(arrays)
    else:
        model.load_arrays(arrays, buffers)
    return model, meta
