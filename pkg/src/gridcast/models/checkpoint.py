"""Checkpoint container: JSON header line plus named parameter payloads.

The header lists every state entry with name, shape, and dtype; payloads are
concatenated little-endian raw bytes in header order, so a save/load round
trip is bit-exact.
"""

from __future__ import annotations

from pathlib import Path

import numpy as np
import torch
from torch import nn

from ..errors import CorruptionError, FormatError
from ..storage import read_container, write_container

_TO_TAG = {torch.float32: "f32", torch.float64: "f64", torch.int64: "i64"}
_TO_NP = {"f32": np.dtype("<f4"), "f64": np.dtype("<f8"), "i64": np.dtype("<i8")}


def save_checkpoint(model: nn.Module, path, *, config: dict, seed: int,
                    epoch: int, metric=None) -> Path:
    entries = []
    payloads = []
    for name, tensor in model.state_dict().items():
        tensor = tensor.detach().cpu().contiguous()
        if tensor.dtype not in _TO_TAG:
            raise FormatError(f"unsupported checkpoint dtype {tensor.dtype} for {name}")
        tag = _TO_TAG[tensor.dtype]
        arr = tensor.numpy().astype(_TO_NP[tag], copy=False)
        entries.append({"name": name, "shape": list(tensor.shape), "dtype": tag})
        payloads.append(arr.tobytes())
    header = {
        "kind": "model-checkpoint",
        "config": config,
        "seed": seed,
        "epoch": epoch,
        "metric": metric,
        "params": entries,
    }
    return write_container(path, header, b"".join(payloads))


def load_checkpoint(path, model: nn.Module = None) -> tuple[dict, dict]:
    """Read a checkpoint; optionally restore it into ``model`` in place."""
    header, payload = read_container(path)
    if header.get("kind") != "model-checkpoint":
        raise FormatError(f"{path}: not a model checkpoint")
    state = {}
    offset = 0
    for entry in header["params"]:
        dtype = _TO_NP.get(entry["dtype"])
        if dtype is None:
            raise FormatError(f"{path}: unknown dtype tag {entry['dtype']!r}")
        nbytes = int(np.prod(entry["shape"], initial=1)) * dtype.itemsize
        chunk = payload[offset:offset + nbytes]
        if len(chunk) != nbytes:
            raise CorruptionError(f"{path}: payload truncated at entry {entry['name']!r}")
        offset += nbytes
        arr = np.frombuffer(chunk, dtype=dtype).reshape(entry["shape"]).copy()
        state[entry["name"]] = torch.from_numpy(arr)
    if offset != len(payload):
        raise CorruptionError(f"{path}: {len(payload) - offset} trailing payload bytes")
    if model is not None:
        model.load_state_dict(state)
    return header, state


def load_model(path):
    """Rebuild the model a checkpoint describes and restore its state."""
    from .config import BackboneConfig
    from .factory import ForecastModel, build_backbone
    from .geo import GeoEmbedding

    header, state = load_checkpoint(path)
    config = header.get("config") or {}
    if "backbone" not in config:
        raise FormatError(f"{path}: checkpoint header carries no backbone config")
    backbone = build_backbone(BackboneConfig.from_dict(config["backbone"]))
    geo = None
    if config.get("geo"):
        g = config["geo"]
        geo = GeoEmbedding(g["channels"], g["height"], g["width"], max_norm=g.get("max_norm"))
    model = ForecastModel(backbone, geo)
    model.load_state_dict(state)
    return model
