"""Experiment configuration: method defaults, validation, stable hashing.

Each training method carries its own default hyperparameters so that a
bare ``make_config("proto")`` reproduces the reference protocol for that
method. Every artifact the harness writes is tagged with the config
hash, which covers all fields in a canonical JSON encoding.
"""

from __future__ import annotations

import dataclasses
import hashlib
import json
from dataclasses import dataclass

METHODS = ("baseline", "da", "siamese", "proto", "local")
EPISODIC_METHODS = ("siamese", "proto", "local")
ALLOWED_EVAL_SUPPORTS = (5, 10)

# Reference protocol per method: (epochs, lr, batch/episode geometry).
_METHOD_DEFAULTS: dict[str, dict] = {
    "baseline": {"epochs": 100, "lr": 1e-3, "per_class": 15},
    "da": {"epochs": 100, "lr": 1e-3, "per_class": 15, "label_ratio": 1.0},
    "siamese": {"epochs": 500, "lr": 5e-4, "n_way": 9, "k_shot": 5, "q_query": 15},
    "proto": {"epochs": 500, "lr": 1e-3, "n_way": 5, "k_shot": 10, "q_query": 15},
    "local": {"epochs": 500, "lr": 1e-3, "n_way": 5, "k_shot": 10, "q_query": 15},
}


@dataclass(frozen=True)
class ExperimentConfig:
    """One training + evaluation run, fully determined together with a seed."""

    method: str
    epochs: int
    lr: float
    # closed-set batch geometry (baseline, da)
    per_class: int = 15
    # episode geometry (siamese, proto, local)
    n_way: int = 9
    k_shot: int = 5
    q_query: int = 15
    # domain adaptation only
    label_ratio: float | None = None
    mmd_weight: float = 1.0
    allow_any_ratio: bool = False
    # evaluation protocol
    eval_supports: tuple[int, ...] = (5, 10)
    eval_iterations: int = 100
    pooled_supports: bool = False
    # bookkeeping
    seed: int = 0
    out_dir: str | None = None

    def validate(self) -> None:
        if self.method not in METHODS:
            raise ValueError(f"unknown method {self.method!r}; choose from {METHODS}")
        if self.epochs < 0:
            raise ValueError(f"epochs must be >= 0, got {self.epochs}")
        if not self.lr > 0:
            raise ValueError(f"lr must be positive, got {self.lr}")
        if self.method == "da":
            if self.label_ratio is None:
                raise ValueError("method 'da' requires label_ratio")
            if not 0.0 <= self.label_ratio <= 1.0:
                raise ValueError(f"label_ratio must lie in [0, 1], got {self.label_ratio}")
            if self.label_ratio not in (0.0, 0.5, 1.0) and not self.allow_any_ratio:
                raise ValueError(
                    f"label_ratio {self.label_ratio} outside (0.0, 0.5, 1.0); "
                    "set allow_any_ratio to use it anyway"
                )
            if self.mmd_weight < 0:
                raise ValueError(f"mmd_weight must be >= 0, got {self.mmd_weight}")
        elif self.label_ratio is not None:
            raise ValueError(f"label_ratio is only valid with method 'da', not {self.method!r}")
        if self.method in ("baseline", "da") and self.per_class < 1:
            raise ValueError(f"per_class must be >= 1, got {self.per_class}")
        if self.method in EPISODIC_METHODS:
            for name in ("n_way", "k_shot", "q_query"):
                if getattr(self, name) < 1:
                    raise ValueError(f"{name} must be >= 1, got {getattr(self, name)}")
        for k in self.eval_supports:
            if k not in ALLOWED_EVAL_SUPPORTS:
                raise ValueError(
                    f"eval support count {k} not in {ALLOWED_EVAL_SUPPORTS}"
                )
        if self.eval_iterations < 1:
            raise ValueError(f"eval_iterations must be >= 1, got {self.eval_iterations}")

    def to_dict(self) -> dict:
        d = dataclasses.asdict(self)
        d["eval_supports"] = list(self.eval_supports)
        return d


def make_config(method: str, **overrides) -> ExperimentConfig:
    """Build a validated config from the method's defaults plus overrides.

    Unknown override keys are rejected so typos cannot silently fall back
    to defaults.
    """
    if method not in _METHOD_DEFAULTS:
        raise ValueError(f"unknown method {method!r}; choose from {METHODS}")
    fields = {f.name for f in dataclasses.fields(ExperimentConfig)}
    unknown = set(overrides) - fields
    if unknown:
        raise ValueError(f"unknown config keys: {sorted(unknown)}")
    values = dict(_METHOD_DEFAULTS[method])
    values.update(overrides)
    if "eval_supports" in values:
        values["eval_supports"] = tuple(values["eval_supports"])
    cfg = ExperimentConfig(method=method, **values)
    cfg.validate()
    return cfg


def config_hash(cfg: ExperimentConfig) -> str:
    """Short stable digest of the experiment identity.

    ``out_dir`` is where a run writes, not what it computes, so it is
    excluded: the same experiment hashes identically in any workspace.
    """
    doc = cfg.to_dict()
    doc.pop("out_dir", None)
    canon = json.dumps(doc, sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(canon.encode()).hexdigest()[:12]
