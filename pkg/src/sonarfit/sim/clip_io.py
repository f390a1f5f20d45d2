"""Audio clip container plus on-disk format.

A clip is stored as two files: a little-endian binary blob with the raw
samples (16-byte header: magic ``SFIT``, u32 version, u64 sample count,
then float32 samples) and a JSONL sidecar with one annotation segment
per line plus the clip-level metadata repeated on each line so the
sidecar is self-contained.
"""

from __future__ import annotations

import json
import struct
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .profiles import SAMPLE_RATE_HZ

MAGIC = b"SFIT"
VERSION = 1
_HEADER = struct.Struct("<4sIQ")


@dataclass(frozen=True)
class Segment:
    """One labelled span of a clip, in seconds from clip start."""

    start_s: float
    end_s: float
    class_id: int


@dataclass
class AudioClip:
    samples: np.ndarray  # float32, mono
    sample_rate: int = SAMPLE_RATE_HZ
    annotations: list[Segment] = field(default_factory=list)
    subject: str = "S0"
    domain: str = "lab"
    session: int = 0

    @property
    def duration_s(self) -> float:
        return len(self.samples) / self.sample_rate

    def validate(self) -> None:
        if self.samples.ndim != 1:
            raise ValueError("clip samples must be 1-D mono")
        peak = float(np.max(np.abs(self.samples))) if len(self.samples) else 0.0
        if peak > 1.0 + 1e-6:
            raise ValueError(f"clip samples exceed [-1, 1] (peak {peak:.4f})")
        prev_end = 0.0
        for seg in self.annotations:
            if seg.end_s <= seg.start_s:
                raise ValueError(f"empty/negative segment {seg}")
            if seg.start_s < prev_end - 1e-9:
                raise ValueError(f"overlapping segments at {seg.start_s:.3f}s")
            if seg.end_s > self.duration_s + 1e-6:
                raise ValueError(f"segment {seg} runs past clip end {self.duration_s:.3f}s")
            prev_end = seg.end_s


def _annotation_path(blob_path: Path) -> Path:
    return blob_path.with_suffix(".jsonl")


def save_clip(clip: AudioClip, path: str | Path) -> None:
    """Write ``<path>`` (sample blob) and ``<path stem>.jsonl`` (annotations)."""
    clip.validate()
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    payload = np.ascontiguousarray(clip.samples, dtype="<f4")
    with open(path, "wb") as fh:
        fh.write(_HEADER.pack(MAGIC, VERSION, len(payload)))
        fh.write(payload.tobytes())
    with open(_annotation_path(path), "w") as fh:
        for seg in clip.annotations:
            fh.write(
                json.dumps(
                    {
                        "start_s": round(seg.start_s, 6),
                        "end_s": round(seg.end_s, 6),
                        "class_id": seg.class_id,
                        "subject": clip.subject,
                        "domain": clip.domain,
                        "session": clip.session,
                        "sample_rate": clip.sample_rate,
                    }
                )
                + "\n"
            )


def load_clip(path: str | Path) -> AudioClip:
    path = Path(path)
    raw = path.read_bytes()
    if len(raw) < _HEADER.size:
        raise ValueError(f"{path}: truncated header")
    magic, version, count = _HEADER.unpack_from(raw)
    if magic != MAGIC:
        raise ValueError(f"{path}: bad magic {magic!r}")
    if version != VERSION:
        raise ValueError(f"{path}: unsupported version {version}")
    body = raw[_HEADER.size:]
    if len(body) != 4 * count:
        raise ValueError(f"{path}: expected {4 * count} payload bytes, found {len(body)}")
    samples = np.frombuffer(body, dtype="<f4").astype(np.float32)

    annotations: list[Segment] = []
    subject, domain, session, rate = "S0", "lab", 0, SAMPLE_RATE_HZ
    ann_path = _annotation_path(path)
    if ann_path.exists():
        for line in ann_path.read_text().splitlines():
            if not line.strip():
                continue
            rec = json.loads(line)
            annotations.append(Segment(rec["start_s"], rec["end_s"], rec["class_id"]))
            subject = rec.get("subject", subject)
            domain = rec.get("domain", domain)
            session = rec.get("session", session)
            rate = rec.get("sample_rate", rate)
    clip = AudioClip(
        samples=samples,
        sample_rate=rate,
        annotations=annotations,
        subject=subject,
        domain=domain,
        session=session,
    )
    clip.validate()
    return clip
