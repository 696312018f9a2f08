"""Per-problem activation store: step index -> float32 payload + shape.

One JSON header line declaring the entries, then the concatenated
little-endian float32 payloads in header order.
"""

from __future__ import annotations

import json
from pathlib import Path

import numpy as np


def save_activation_blob(path, arrays: dict[int, np.ndarray]) -> None:
    entries = []
    payloads = []
    for step_index in sorted(arrays):
        arr = np.ascontiguousarray(arrays[step_index], dtype="<f4")
        entries.append({"step": step_index, "shape": list(arr.shape)})
        payloads.append(arr.tobytes())
    with Path(path).open("wb") as fh:
        fh.write(json.dumps({"entries": entries}).encode("utf-8"))
        fh.write(b"\n")
        for blob in payloads:
            fh.write(blob)


def load_activation_blob(path) -> dict[int, np.ndarray]:
    with Path(path).open("rb") as fh:
        header = json.loads(fh.readline().decode("utf-8"))
        payload = fh.read()
    out: dict[int, np.ndarray] = {}
    pos = 0
    for entry in header["entries"]:
        shape = tuple(entry["shape"])
        size = int(np.prod(shape)) * 4
        arr = np.frombuffer(payload[pos : pos + size], dtype="<f4")
        out[entry["step"]] = arr.astype(np.float64).reshape(shape)
        pos += size
    return out
