"""Fixed-size classification windows cut from a spectrogram.

A window is 129 consecutive frames (about 6 s), started every 64 frames.
It takes the label of a class whose annotation covers at least 60% of
its frames; windows without such a majority fall back to the none class,
which also absorbs transitions between exercises.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..sim.clip_io import Segment
from ..sim.profiles import N_CLASSES, NONE_CLASS
from .stft import Spectrogram

WINDOW_FRAMES = 129
WINDOW_STRIDE = 64
LABEL_COVERAGE = 0.6
NORM_EPS = 1e-5


@dataclass
class SampleWindow:
    values: np.ndarray  # (WINDOW_FRAMES, n_bins) float32, dB
    label: int
    subject: str
    domain: str
    session: int
    start_frame: int
    start_s: float

    def validate(self) -> None:
        if self.values.ndim != 2 or self.values.shape[0] != WINDOW_FRAMES:
            raise ValueError(f"window values must be ({WINDOW_FRAMES}, bins), got {self.values.shape}")
        if not 0 <= self.label < N_CLASSES:
            raise ValueError(f"label {self.label} outside 0..{N_CLASSES - 1}")


def frame_labels(spec: Spectrogram, annotations: list[Segment]) -> np.ndarray:
    """Per-frame class ids; a frame takes the segment covering its center."""
    labels = np.full(spec.n_frames, NONE_CLASS, dtype=np.int64)
    centers = spec.frame_center_s
    for seg in annotations:
        mask = (centers >= seg.start_s) & (centers < seg.end_s)
        labels[mask] = seg.class_id
    return labels


def window_label(labels: np.ndarray) -> int:
    """Majority label of one window under the 60% coverage rule."""
    counts = np.bincount(labels, minlength=N_CLASSES)
    top = int(np.argmax(counts))
    need = int(np.ceil(LABEL_COVERAGE * len(labels)))
    return top if counts[top] >= need else NONE_CLASS


def slice_windows(
    spec: Spectrogram,
    annotations: list[Segment],
    subject: str = "S0",
    domain: str = "lab",
    session: int = 0,
) -> list[SampleWindow]:
    """Cut overlapping windows from a spectrogram and label each one."""
    if spec.n_frames < WINDOW_FRAMES:
        return []
    per_frame = frame_labels(spec, annotations)
    n_windows = (spec.n_frames - WINDOW_FRAMES) // WINDOW_STRIDE + 1
    out = []
    for w in range(n_windows):
        s = w * WINDOW_STRIDE
        win = SampleWindow(
            values=spec.values[s : s + WINDOW_FRAMES],
            label=window_label(per_frame[s : s + WINDOW_FRAMES]),
            subject=subject,
            domain=domain,
            session=session,
            start_frame=s,
            start_s=float(s * spec.config.frame_period_s),
        )
        win.validate()
        out.append(win)
    return out


def instance_normalize(values: np.ndarray) -> np.ndarray:
    """Zero-mean unit-variance over all cells of one window.

    Removes any constant dB offset, which is how receiver gain shows up
    after the log, so the features are gain-invariant by construction.
    """
    x = np.asarray(values, dtype=np.float64)
    mu = x.mean()
    var = x.var()
    return ((x - mu) / np.sqrt(var + NORM_EPS)).astype(np.float32)
