"""On-disk format for window sets.

A window set is a binary blob (24-byte header: magic ``SFWD``, u32
version, u64 window count, u32 frames, u32 bins, then float32 values)
plus a JSONL manifest with one record per window carrying its label and
provenance. Window ``i`` in the manifest is slab ``i`` of the blob.
"""

from __future__ import annotations

import json
import struct
from pathlib import Path

import numpy as np

from .windows import SampleWindow

MAGIC = b"SFWD"
VERSION = 1
_HEADER = struct.Struct("<4sIQII")


def _manifest_path(blob_path: Path) -> Path:
    return blob_path.with_suffix(".jsonl")


def save_windows(windows: list[SampleWindow], path: str | Path) -> None:
    if not windows:
        raise ValueError("refusing to write an empty window set")
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    frames, bins = windows[0].values.shape
    for w in windows:
        w.validate()
        if w.values.shape != (frames, bins):
            raise ValueError(f"inconsistent window shapes: {w.values.shape} vs {(frames, bins)}")

    with open(path, "wb") as fh:
        fh.write(_HEADER.pack(MAGIC, VERSION, len(windows), frames, bins))
        for w in windows:
            fh.write(np.ascontiguousarray(w.values, dtype="<f4").tobytes())
    with open(_manifest_path(path), "w") as fh:
        for i, w in enumerate(windows):
            fh.write(
                json.dumps(
                    {
                        "index": i,
                        "label": w.label,
                        "subject": w.subject,
                        "domain": w.domain,
                        "session": w.session,
                        "start_frame": w.start_frame,
                        "start_s": round(w.start_s, 6),
                    }
                )
                + "\n"
            )


def load_windows(path: str | Path) -> list[SampleWindow]:
    path = Path(path)
    raw = path.read_bytes()
    if len(raw) < _HEADER.size:
        raise ValueError(f"{path}: truncated header")
    magic, version, count, frames, bins = _HEADER.unpack_from(raw)
    if magic != MAGIC:
        raise ValueError(f"{path}: bad magic {magic!r}")
    if version != VERSION:
        raise ValueError(f"{path}: unsupported version {version}")
    body = raw[_HEADER.size:]
    expected = 4 * count * frames * bins
    if len(body) != expected:
        raise ValueError(f"{path}: expected {expected} payload bytes, found {len(body)}")
    values = np.frombuffer(body, dtype="<f4").reshape(count, frames, bins)

    manifest = _manifest_path(path)
    if not manifest.exists():
        raise FileNotFoundError(f"missing window manifest {manifest}")
    records = [json.loads(line) for line in manifest.read_text().splitlines() if line.strip()]
    if len(records) != count:
        raise ValueError(f"{manifest}: {len(records)} records for {count} windows")

    windows = []
    for i, rec in enumerate(records):
        if rec["index"] != i:
            raise ValueError(f"{manifest}: record {i} has index {rec['index']}")
        w = SampleWindow(
            values=values[i].astype(np.float32),
            label=rec["label"],
            subject=rec["subject"],
            domain=rec["domain"],
            session=rec["session"],
            start_frame=rec["start_frame"],
            start_s=rec["start_s"],
        )
        w.validate()
        windows.append(w)
    return windows
