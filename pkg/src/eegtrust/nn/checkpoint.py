"""Parameter checkpoints.

Layout: 8-byte little-endian header length, UTF-8 JSON header (parameter
names, shapes, byte offsets, model config, seed), then the parameters as
concatenated little-endian float32 in header order.
"""
from __future__ import annotations

import json
import struct
from pathlib import Path

import numpy as np

from ..errors import DataError

MAGIC = "eegtrust-checkpoint"
VERSION = 1


def save_checkpoint(path, params, config=None, seed=None, extra=None):
    """``params``: mapping name -> array (or Parameter)."""
    entries, chunks, offset = [], [], 0
    for name, value in params.items():
        arr = np.asarray(getattr(value, "data", value), dtype="<f4")
        entries.append({"name": name, "shape": list(arr.shape), "offset": offset})
        chunks.append(arr.tobytes(order="C"))
        offset += arr.nbytes
    header = {
        "format": MAGIC,
        "version": VERSION,
        "config": config or {},
        "seed": seed,
        "params": entries,
        "extra": extra or {},
    }
    blob = json.dumps(header, sort_keys=True).encode("utf-8")
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "wb") as fh:
        fh.write(struct.pack("<Q", len(blob)))
        fh.write(blob)
        for c in chunks:
            fh.write(c)


def load_checkpoint(path):
    """Return ``(header, {name: float64 array})``."""
    raw = Path(path).read_bytes()
    if len(raw) < 8:
        raise DataError(f"checkpoint {path} is truncated")
    (n,) = struct.unpack("<Q", raw[:8])
    try:
        header = json.loads(raw[8:8 + n].decode("utf-8"))
    except (UnicodeDecodeError, json.JSONDecodeError) as exc:
        raise DataError(f"checkpoint {path}: bad header ({exc})") from exc
    if header.get("format") != MAGIC:
        raise DataError(f"checkpoint {path}: not an eegtrust checkpoint")
    payload = raw[8 + n:]
    params = {}
    for e in header["params"]:
        count = int(np.prod(e["shape"])) if e["shape"] else 1
        start, stop = e["offset"], e["offset"] + 4 * count
        if stop > len(payload):
            raise DataError(f"checkpoint {path}: payload truncated at {e['name']}")
        params[e["name"]] = np.frombuffer(payload[start:stop], dtype="<f4").reshape(e["shape"]).astype(np.float64)
    return header, params
