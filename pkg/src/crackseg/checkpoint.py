"""Weight checkpoint file.

Layout (all integers little-endian)::

    8 bytes   magic  b"CRKSEG01"
    8 bytes   uint64 manifest length M
    M bytes   UTF-8 JSON manifest
    ...       float64 ('<f8') payload, tensors concatenated in manifest order

The manifest is ``{"format": 1, "config": {...}, "tensors": [{"name", "shape",
"offset", "count"}, ...]}`` where ``offset``/``count`` are measured in
float64 elements from the start of the payload. Keys are sorted so the bytes
are a pure function of the weights and config.
"""

from __future__ import annotations

import dataclasses
import json
import struct
from collections import OrderedDict
from pathlib import Path

import numpy as np

from .config import NetworkConfig
from .errors import DataError
from .head import CrackSegNet

MAGIC = b"CRKSEG01"
FORMAT_VERSION = 1


def encode(state: "OrderedDict[str, np.ndarray]", config: dict | None = None) -> bytes:
    entries = []
    offset = 0
    for name, arr in state.items():
        count = int(np.asarray(arr).size)
        entries.append({"name": name, "shape": list(np.asarray(arr).shape), "offset": offset, "count": count})
        offset += count
    manifest = json.dumps({"format": FORMAT_VERSION, "config": config or {}, "tensors": entries},
                          sort_keys=True, separators=(",", ":")).encode()
    payload = b"".join(np.asarray(a, dtype="<f8").tobytes(order="C") for a in state.values())
    return MAGIC + struct.pack("<Q", len(manifest)) + manifest + payload


def decode(blob: bytes) -> tuple["OrderedDict[str, np.ndarray]", dict]:
    if blob[:8] != MAGIC:
        raise DataError("not a checkpoint file (bad magic)")
    (mlen,) = struct.unpack("<Q", blob[8:16])
    manifest = json.loads(blob[16:16 + mlen].decode())
    if manifest.get("format") != FORMAT_VERSION:
        raise DataError(f"unsupported checkpoint format {manifest.get('format')}")
    payload = np.frombuffer(blob, dtype="<f8", offset=16 + mlen)
    state = OrderedDict()
    for e in manifest["tensors"]:
        chunk = payload[e["offset"]:e["offset"] + e["count"]]
        if chunk.size != e["count"]:
            raise DataError(f"checkpoint truncated at tensor {e['name']}")
        state[e["name"]] = chunk.astype(np.float64).reshape(e["shape"])
    return state, manifest.get("config", {})


def network_config(cfg: NetworkConfig) -> dict:
    return {"network": dataclasses.asdict(cfg)}


def save(path: str | Path, model, extra_config: dict | None = None) -> int:
    """Write ``model``'s weights plus its network config; returns the file size."""
    config = network_config(model.cfg)
    if extra_config:
        config.update(extra_config)
    blob = encode(model.state_dict(), config)
    Path(path).parent.mkdir(parents=True, exist_ok=True)
    Path(path).write_bytes(blob)
    return len(blob)


def load(path: str | Path):
    """Rebuild the network stored at ``path``."""
    try:
        blob = Path(path).read_bytes()
    except OSError as exc:
        raise DataError(f"cannot read checkpoint {path}: {exc}") from None
    state, config = decode(blob)
    cfg = NetworkConfig.from_dict(config.get("network", {}))
    model = CrackSegNet(cfg, seed=0)
    model.load_state_dict(state)
    return model


def element_count(path: str | Path) -> int:
    state, _ = decode(Path(path).read_bytes())
    return sum(a.size for a in state.values())
