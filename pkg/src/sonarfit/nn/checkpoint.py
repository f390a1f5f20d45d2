"""Named-tensor checkpoint archive.

Layout: magic "SFCK", u32 version, u64 JSON header length, JSON header,
then the concatenated little-endian float32 tensor payloads. The header
records name/shape/offset per tensor plus free-form metadata.
"""

from __future__ import annotations

import json
import struct
from pathlib import Path

import numpy as np

MAGIC = b"SFCK"
VERSION = 1


def save_checkpoint(path, arrays: dict[str, np.ndarray], meta: dict | None = None) -> None:
    index = []
    payloads = []
    offset = 0
    for name in sorted(arrays):
        arr = np.ascontiguousarray(arrays[name], dtype="<f4")
        index.append({"name": name, "shape": list(arr.shape), "offset": offset, "nbytes": arr.nbytes})
        payloads.append(arr.tobytes())
        offset += arr.nbytes
    header = json.dumps(
        {"version": VERSION, "meta": meta or {}, "tensors": index}, sort_keys=True
    ).encode()
    with open(path, "wb") as fh:
        fh.write(MAGIC)
        fh.write(struct.pack("<I", VERSION))
        fh.write(struct.pack("<Q", len(header)))
        fh.write(header)
        for blob in payloads:
            fh.write(blob)


def load_checkpoint(path) -> tuple[dict[str, np.ndarray], dict]:
    """Returns (name -> float64 array, metadata)."""
    path = Path(path)
    raw = path.read_bytes()
    if raw[:4] != MAGIC:
        raise ValueError(f"{path}: not a checkpoint archive")
    version = struct.unpack("<I", raw[4:8])[0]
    if version != VERSION:
        raise ValueError(f"{path}: unsupported checkpoint version {version}")
    header_len = struct.unpack("<Q", raw[8:16])[0]
    header = json.loads(raw[16 : 16 + header_len].decode())
    base = 16 + header_len
    arrays = {}
    for entry in header["tensors"]:
        start = base + entry["offset"]
        flat = np.frombuffer(raw, dtype="<f4", count=entry["nbytes"] // 4, offset=start)
        arrays[entry["name"]] = flat.reshape(entry["shape"]).astype(np.float64)
    return arrays, header.get("meta", {})
