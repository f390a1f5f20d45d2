"""Closed-set sequence classifier: two stacked bidirectional LSTMs.

Each spectrogram frame (372 dB bins) is one time step. The second
BiLSTM's final states - forward state at the last step, backward state
at the first - are concatenated and mapped by a dense layer to 9 class
logits.
"""

from __future__ import annotations

import numpy as np

from ..nn import BiLstm, Dense, ParameterSet, Tensor, concat, no_grad, softmax_cross_entropy
from ..sim.profiles import N_CLASSES
from .common import save_model

HIDDEN = 128
PRED_CHUNK = 64


def concat_final_states(seq: Tensor, hidden: int) -> Tensor:
    """Forward last-step and backward first-step halves of a BiLSTM
    output (B, T, 2H), concatenated to (B, 2H)."""
    t = seq.data.shape[1]
    return concat([seq[:, t - 1, :hidden], seq[:, 0, hidden:]], axis=1)


class BaselineBiLstm:
    def __init__(self, n_bins: int, seed: int = 0, hidden: int = HIDDEN,
                 n_classes: int = N_CLASSES, dtype=np.float32):
        rng = np.random.default_rng(seed)
        self.n_bins = n_bins
        self.hidden = hidden
        self.n_classes = n_classes
        self.dtype = dtype
        self.lstm1 = BiLstm(n_bins, hidden, rng, dtype)
        self.lstm2 = BiLstm(2 * hidden, hidden, rng, dtype)
        self.head = Dense(2 * hidden, n_classes, rng, dtype)
        self.params = ParameterSet()
        self.params.extend("lstm1", self.lstm1.named_params())
        self.params.extend("lstm2", self.lstm2.named_params())
        self.params.extend("head", self.head.named_params())

    def forward(self, x: Tensor) -> Tensor:
        """(B, frames, bins) -> (B, n_classes) logits."""
        if x.data.ndim != 3 or x.data.shape[2] != self.n_bins or x.data.shape[1] < 1:
            raise ValueError(
                f"expected (B, frames, {self.n_bins}) input, got {x.data.shape}"
            )
        seq = self.lstm2(self.lstm1(x))  # (B, T, 2H)
        return self.head(concat_final_states(seq, self.hidden))

    def loss(self, x: np.ndarray, y: np.ndarray) -> Tensor:
        return softmax_cross_entropy(self.forward(Tensor(np.asarray(x, dtype=self.dtype))), y)

    def predict(self, x: np.ndarray) -> np.ndarray:
        """Argmax class ids for a window stack, computed without a tape."""
        x = np.asarray(x, dtype=self.dtype)
        preds = []
        with no_grad():
            for c0 in range(0, len(x), PRED_CHUNK):
                logits = self.forward(Tensor(x[c0 : c0 + PRED_CHUNK]))
                preds.append(np.argmax(logits.data, axis=1))
        return np.concatenate(preds) if preds else np.empty(0, dtype=np.int64)

    def save(self, path, train_config: dict | None = None) -> None:
        save_model(path, "baseline_bilstm", self.params, {}, train_config,
                   extra_meta={"n_bins": self.n_bins})

    def load_arrays(self, arrays: dict[str, np.ndarray]) -> None:
        self.params.load_arrays(arrays)
