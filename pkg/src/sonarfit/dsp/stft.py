"""Short-time Fourier features for continuous-wave sonar clips.

The defaults give a 12250-sample Hann analysis window (3.6 Hz velocity
resolution at 44.1 kHz), a 2048-sample hop (46.44 ms frame period), and
a zero-padded 16384-point FFT whose grid spacing is 44100/16384 =
2.6917 Hz. Only the 19.5-20.5 kHz band around the carrier is kept,
which comes to 372 bins, and magnitudes are stored in dB floored at
-120 dB.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from ..sim.profiles import CARRIER_HZ, SAMPLE_RATE_HZ

DB_FLOOR = -120.0
_MAG_FLOOR = 10.0 ** (DB_FLOOR / 20.0)
_FFT_CHUNK_FRAMES = 512


@dataclass(frozen=True)
class StftConfig:
    sample_rate: int = SAMPLE_RATE_HZ
    window_len: int = 12250
    hop: int = 2048
    fft_len: int = 16384
    band_low_hz: float = 19500.0
    band_high_hz: float = 20500.0
    carrier_hz: float = CARRIER_HZ

    def validate(self) -> None:
        if self.sample_rate <= 0 or self.window_len <= 0 or self.hop <= 0:
            raise ValueError("sample_rate, window_len and hop must be positive")
        if self.fft_len < self.window_len:
            raise ValueError(f"fft_len {self.fft_len} < window_len {self.window_len}")
        nyquist = self.sample_rate / 2.0
        if not (0.0 < self.band_low_hz < self.band_high_hz <= nyquist):
            raise ValueError(
                f"band [{self.band_low_hz}, {self.band_high_hz}] invalid for Nyquist {nyquist}"
            )
        lo, hi = self.band_bin_range()
        if hi < lo:
            raise ValueError("band contains no FFT bins")
        if not (lo <= self.carrier_bin() <= hi):
            raise ValueError("carrier falls outside the analysis band")

    @property
    def grid_hz(self) -> float:
        """FFT bin spacing of the zero-padded transform."""
        return self.sample_rate / self.fft_len

    @property
    def analysis_resolution_hz(self) -> float:
        """Resolution set by the analysis window length."""
        return self.sample_rate / self.window_len

    @property
    def frame_period_s(self) -> float:
        return self.hop / self.sample_rate

    def band_bin_range(self) -> tuple[int, int]:
        """Inclusive (first, last) FFT bin whose center lies in the band."""
        lo = math.ceil(self.band_low_hz / self.grid_hz)
        hi = math.floor(self.band_high_hz / self.grid_hz)
        return lo, hi

    @property
    def n_bins(self) -> int:
        lo, hi = self.band_bin_range()
        return hi - lo + 1

    def carrier_bin(self) -> int:
        return round(self.carrier_hz / self.grid_hz)

    @property
    def carrier_index(self) -> int:
        """Index of the carrier bin within the cropped band."""
        return self.carrier_bin() - self.band_bin_range()[0]


@dataclass
class Spectrogram:
    """dB-magnitude time-frequency grid restricted to the analysis band."""

    values: np.ndarray  # (n_frames, n_bins) float32, dB
    bin_freqs_hz: np.ndarray  # (n_bins,)
    frame_center_s: np.ndarray  # (n_frames,)
    carrier_index: int
    config: StftConfig

    @property
    def n_frames(self) -> int:
        return self.values.shape[0]

    @property
    def n_bins(self) -> int:
        return self.values.shape[1]


def stft(samples: np.ndarray, config: StftConfig | None = None) -> Spectrogram:
    """Band-cropped dB spectrogram of a mono clip.

    Frames start every ``hop`` samples; only complete analysis windows
    are emitted, so the clip must be at least ``window_len`` samples.
    """
    config = StftConfig() if config is None else config
    config.validate()
    x = np.asarray(samples, dtype=np.float64)
    if x.ndim != 1:
        raise ValueError("expected a mono sample array")
    if len(x) < config.window_len:
        raise ValueError(
            f"clip too short for one analysis window ({len(x)} < {config.window_len})"
        )

    n_frames = 1 + (len(x) - config.window_len) // config.hop
    lo, hi = config.band_bin_range()
    window = np.hanning(config.window_len)
    offsets = np.arange(config.window_len)

    values = np.empty((n_frames, hi - lo + 1), dtype=np.float32)
    for c0 in range(0, n_frames, _FFT_CHUNK_FRAMES):
        c1 = min(c0 + _FFT_CHUNK_FRAMES, n_frames)
        starts = np.arange(c0, c1) * config.hop
        segs = x[starts[:, None] + offsets[None, :]] * window
        spec = np.fft.rfft(segs, n=config.fft_len, axis=1)[:, lo : hi + 1]
        values[c0:c1] = 20.0 * np.log10(np.maximum(np.abs(spec), _MAG_FLOOR))

    starts_all = np.arange(n_frames) * config.hop
    return Spectrogram(
        values=values,
        bin_freqs_hz=np.arange(lo, hi + 1) * config.grid_hz,
        frame_center_s=(starts_all + config.window_len / 2.0) / config.sample_rate,
        carrier_index=config.carrier_index,
        config=config,
    )
