"""Clip-to-window glue: run the spectrogram front end over whole clips."""

from __future__ import annotations

from ..sim.clip_io import AudioClip
from .stft import StftConfig, stft
from .windows import SampleWindow, slice_windows


def featurize_clip(clip: AudioClip, config: StftConfig | None = None) -> list[SampleWindow]:
    """Spectrogram + labeled overlapping windows for one clip."""
    spec = stft(clip.samples, config)
    return slice_windows(
        spec, clip.annotations,
        subject=clip.subject, domain=clip.domain, session=clip.session,
    )


def featurize_clips(clips: list[AudioClip], config: StftConfig | None = None) -> list[SampleWindow]:
    """Windows of several clips, concatenated in clip order."""
    out: list[SampleWindow] = []
    for clip in clips:
        out.extend(featurize_clip(clip, config))
    return out
