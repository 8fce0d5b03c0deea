"""Self-describing checkpoint files.

Byte layout (little endian)::

    b"PFCK"                 magic, 4 bytes
    uint16 version          currently 1
    uint32 header_len
    header                  UTF-8 JSON, keys: config, meta, adam, tensors
    payload                 float32 tensors back to back, row-major

``tensors`` is a list of {name, shape, offset, nbytes}, offsets relative to
the payload start. Model tensors use their dotted parameter or buffer name;
Adam moments are stored as ``adam.m/<name>`` and ``adam.v/<name>``.
"""
from __future__ import annotations

import json
import struct
from pathlib import Path

import numpy as np

MAGIC = b"PFCK"
VERSION = 1


def save_checkpoint(path, tensors: dict[str, np.ndarray], config: dict, meta: dict,
                    adam: dict | None = None) -> None:
    index, chunks, offset = [], [], 0
    for name, arr in tensors.items():
        data = np.ascontiguousarray(arr, dtype="<f4").tobytes()
        index.append({"name": name, "shape": list(np.shape(arr)), "offset": offset, "nbytes": len(data)})
        chunks.append(data)
        offset += len(data)
    header = json.dumps({"config": config, "meta": meta, "adam": adam or {}, "tensors": index},
                        sort_keys=True).encode()
    with open(path, "wb") as f:
        f.write(MAGIC + struct.pack("<HI", VERSION, len(header)) + header)
        for c in chunks:
            f.write(c)


def load_checkpoint(path) -> tuple[dict[str, np.ndarray], dict, dict, dict]:
    """Return (tensors, config, meta, adam)."""
    data = Path(path).read_bytes()
    if data[:4] != MAGIC:
        raise ValueError(f"{path}: not a checkpoint file")
    version, hlen = struct.unpack_from("<HI", data, 4)
    if version != VERSION:
        raise ValueError(f"{path}: unsupported checkpoint version {version}")
    header = json.loads(data[10:10 + hlen])
    base = 10 + hlen
    tensors = {}
    for t in header["tensors"]:
        arr = np.frombuffer(data, dtype="<f4", count=t["nbytes"] // 4, offset=base + t["offset"])
        tensors[t["name"]] = arr.reshape(t["shape"]).astype(np.float32)
    return tensors, header["config"], header["meta"], header["adam"]
