"""Domain-adaptation classifier: shared backbone, MMD-aligned embeddings.

The training loss is the unweighted sum of the source cross entropy,
the cross entropy over whatever fraction of the target batch carries
labels, and the MMD between source and target embeddings. Unlabeled
target windows therefore still shape the model through the MMD term.
"""

from __future__ import annotations

import numpy as np

from ..nn import Dense, ParameterSet, Tensor, concat, leaky_relu, no_grad, softmax_cross_entropy
from ..sim.profiles import N_CLASSES
from .backbone import LEAK, ConvNetBackbone
from .common import save_model
from .mmd import mmd

ALLOWED_RATIOS = (0.0, 0.5, 1.0)
HEAD_HIDDEN = 128
PRED_CHUNK = 32
UNLABELED = -1


class DomainAdaptationNet:
    def __init__(self, in_frames: int, in_bins: int, seed: int = 0,
                 n_classes: int = N_CLASSES, dtype=np.float32):
        rng = np.random.default_rng(seed)
        self.in_frames = in_frames
        self.in_bins = in_bins
        self.dtype = dtype
        self.backbone = ConvNetBackbone(rng, dtype)
        emb = self.backbone.embed_dim(in_frames, in_bins)
        self.fc1 = Dense(emb, HEAD_HIDDEN, rng, dtype)
        self.fc2 = Dense(HEAD_HIDDEN, n_classes, rng, dtype)
        self.params = ParameterSet()
        self.params.extend("backbone", self.backbone.params.items())
        self.params.extend("head.fc1", self.fc1.named_params())
        self.params.extend("head.fc2", self.fc2.named_params())

    def embed(self, x: Tensor, train: bool) -> Tensor:
        if x.data.shape[2:] != (self.in_frames, self.in_bins):
            raise ValueError(
                f"expected (B, 1, {self.in_frames}, {self.in_bins}) input, got {x.data.shape}"
            )
        return self.backbone.embed(x, train)

    def classify(self, emb: Tensor) -> Tensor:
        return self.fc2(leaky_relu(self.fc1(emb), LEAK))

    def predict(self, x: np.ndarray) -> np.ndarray:
        """Eval-mode argmax labels for (B, frames, bins) windows."""
        x = np.asarray(x, dtype=self.dtype)[:, None, :, :]
        preds = []
        with no_grad():
            for c0 in range(0, len(x), PRED_CHUNK):
                logits = self.classify(self.embed(Tensor(x[c0 : c0 + PRED_CHUNK]), train=False))
                preds.append(np.argmax(logits.data, axis=1))
        return np.concatenate(preds) if preds else np.empty(0, dtype=np.int64)

    def save(self, path, train_config: dict | None = None) -> None:
        save_model(path, "domain_adaptation", self.params, self.backbone.state_buffers(),
                   train_config, extra_meta={"in_frames": self.in_frames, "in_bins": self.in_bins})

    def load_arrays(self, arrays: dict[str, np.ndarray], buffers: dict[str, np.ndarray]) -> None:
        self.params.load_arrays(arrays)
        self.backbone.load_state_buffers(buffers)


def mask_target_labels(
    yt: np.ndarray, label_ratio: float, rng: np.random.Generator
) -> np.ndarray:
    """Mask target labels down to exactly round(label_ratio * len(yt)).

    The kept labels are spread round-robin over the classes (shuffled
    within each class first), so class counts differ by at most one and
    no class goes dark at 50% as long as enough labels are kept.
    """
    yt = np.asarray(yt, dtype=np.int64)
    out = np.full_like(yt, UNLABELED)
    total = int(round(label_ratio * len(yt)))
    if total == 0:
        return out
    queues = [rng.permutation(np.nonzero(yt == c)[0]) for c in np.unique(yt)]
    chosen: list[int] = []
    depth = 0
    while len(chosen) < total:
        took_any = False
        for q in queues:
            if depth < len(q):
                chosen.append(int(q[depth]))
                took_any = True
                if len(chosen) == total:
                    break
        if not took_any:
            break
        depth += 1
    idx = np.array(chosen, dtype=np.int64)
    out[idx] = yt[idx]
    return out


def da_loss(
    model: DomainAdaptationNet,
    xs: np.ndarray,
    ys: np.ndarray,
    xt: np.ndarray,
    yt_partial: np.ndarray,
    label_ratio: float,
    mmd_weight: float = 1.0,
    allow_any_ratio: bool = False,
    train: bool = True,
) -> tuple[Tensor, dict[str, float]]:
    """Composite adaptation loss; returns (loss, per-term values).

    ``yt_partial`` carries UNLABELED (-1) for masked windows; its labeled
    count must equal round(label_ratio * len(target batch)).
    """
    if label_ratio not in ALLOWED_RATIOS and not allow_any_ratio:
        raise ValueError(
            f"label_ratio {label_ratio} not in {ALLOWED_RATIOS}; "
            "pass allow_any_ratio=True for a free ratio"
        )
    if not 0.0 <= label_ratio <= 1.0:
        raise ValueError(f"label_ratio {label_ratio} outside [0, 1]")
    ys = np.asarray(ys, dtype=np.int64)
    yt_partial = np.asarray(yt_partial, dtype=np.int64)
    labeled = np.nonzero(yt_partial != UNLABELED)[0]
    expected = int(round(label_ratio * len(yt_partial)))
    if len(labeled) != expected:
        raise ValueError(
            f"target batch has {len(labeled)} labeled windows; ratio {label_ratio} implies {expected}"
        )

    n = len(xs)
    x_all = np.concatenate([xs, xt]).astype(model.dtype)[:, None, :, :]
    emb = model.embed(Tensor(x_all), train=train)
    emb_s, emb_t = emb[:n], emb[n:]

    ce_source = softmax_cross_entropy(model.classify(emb_s), ys)
    if len(labeled) > 0:
        ce_target = softmax_cross_entropy(model.classify(emb_t[labeled]), yt_partial[labeled])
    else:
        ce_target = Tensor(np.zeros((), dtype=model.dtype))
    alignment = mmd(emb_s, emb_t)

    loss = ce_source + ce_target + mmd_weight * alignment
    parts = {
        "ce_source": ce_source.item(),
        "ce_target": ce_target.item(),
        "mmd": alignment.item(),
    }
    return loss, parts
