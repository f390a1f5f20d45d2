from .pipeline import featurize_clip, featurize_clips
from .stft import DB_FLOOR, Spectrogram, StftConfig, stft
from .window_io import load_windows, save_windows
from .windows import (
    LABEL_COVERAGE,
    NORM_EPS,
    WINDOW_FRAMES,
    WINDOW_STRIDE,
    SampleWindow,
    frame_labels,
    instance_normalize,
    slice_windows,
    window_label,
)

__all__ = [
    "DB_FLOOR",
    "Spectrogram",
    "StftConfig",
    "stft",
    "featurize_clip",
    "featurize_clips",
    "load_windows",
    "save_windows",
    "LABEL_COVERAGE",
    "NORM_EPS",
    "WINDOW_FRAMES",
    "WINDOW_STRIDE",
    "SampleWindow",
    "frame_labels",
    "instance_normalize",
    "slice_windows",
    "window_label",
]
