"""Utilities shared by all five classification methods."""

from __future__ import annotations

import hashlib
import json
from pathlib import Path

import numpy as np

from ..nn import ParameterSet, Tensor, load_checkpoint, no_grad, save_checkpoint

EMBED_CHUNK = 32


def as_image(x: np.ndarray) -> np.ndarray:
    """(B, frames, bins) window stack -> (B, 1, frames, bins) image batch."""
    x = np.asarray(x, dtype=np.float64)
    if x.ndim == 2:
        x = x[None]
    if x.ndim != 3:
        raise ValueError(f"expected (B, frames, bins) windows, got shape {x.shape}")
    return x[:, None, :, :]


def batched_embed(embed_fn, x: np.ndarray, chunk: int = EMBED_CHUNK) -> np.ndarray:
    """Run ``embed_fn`` (a Tensor -> Tensor map) over ``x`` without a tape."""
    outs = []
    with no_grad():
        for c0 in range(0, len(x), chunk):
            outs.append(embed_fn(Tensor(x[c0 : c0 + chunk])).data)
    return np.concatenate(outs)


def topology_hash(params: ParameterSet) -> str:
    """Stable digest of parameter names and shapes (not values)."""
    lines = [f"{name}:{','.join(map(str, t.data.shape))}" for name, t in sorted(params.items())]
    return hashlib.sha256("\n".join(lines).encode()).hexdigest()[:16]


def save_model(
    path: str | Path,
    method: str,
    params: ParameterSet,
    buffers: dict[str, np.ndarray],
    train_config: dict | None = None,
    extra_meta: dict | None = None,
) -> None:
    """Checkpoint the parameters/buffers and write a model-card JSON."""
    path = Path(path)
    tensors = dict(params.arrays())
    for name, arr in buffers.items():
        tensors[f"buffer/{name}"] = arr
    card = {
        "method": method,
        "backbone_hash": topology_hash(params),
        "train_config": train_config or {},
    }
    if extra_meta:
        card.update(extra_meta)
    save_checkpoint(path, tensors, meta=card)
    path.with_suffix(".json").write_text(json.dumps(card, indent=2, sort_keys=True) + "\n")


def load_model_arrays(path: str | Path) -> tuple[dict[str, np.ndarray], dict[str, np.ndarray], dict]:
    """Split a checkpoint back into (parameter arrays, buffer arrays, card)."""
    tensors, meta = load_checkpoint(path)
    params = {k: v for k, v in tensors.items() if not k.startswith("buffer/")}
    buffers = {k[len("buffer/"):]: v for k, v in tensors.items() if k.startswith("buffer/")}
    return params, buffers, meta
