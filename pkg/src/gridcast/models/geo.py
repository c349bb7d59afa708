"""Learnable per-pixel embedding appended to the model input.

Each pixel (identified by row * width + col) owns a C-vector stored in one
(C, H, W) table that trains with the rest of the model. With ``max_norm``
set, the vector handed to the model is renormalized on read to at most that
Euclidean norm, while the stored table itself stays unconstrained between
lookups.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

import numpy as np
import torch
from torch import nn

from ..errors import ConfigError, ShapeError
from ..features import ChannelManifest, FeatureBundle, ManifestEntry


@dataclass(frozen=True)
class GeoConfig:
    channels: int = 8
    max_norm: Optional[float] = None

    def __post_init__(self):
        if self.channels < 0:
            raise ConfigError("geo-embedding channel count must be >= 0")
        if self.max_norm is not None and self.max_norm <= 0:
            raise ConfigError("max_norm must be positive when set")

    def to_dict(self) -> dict:
        return {"channels": self.channels, "max_norm": self.max_norm}

    @classmethod
    def from_dict(cls, doc: dict) -> "GeoConfig":
        return cls(channels=doc.get("channels", 8), max_norm=doc.get("max_norm"))


class GeoEmbedding(nn.Module):
    def __init__(self, channels: int, height: int, width: int,
                 max_norm: Optional[float] = None):
        super().__init__()
        if channels < 0:
            raise ConfigError("geo-embedding channel count must be >= 0")
        if max_norm is not None and max_norm <= 0:
            raise ConfigError("max_norm must be positive when set")
        self.channels = channels
        self.height = height
        self.width = width
        self.max_norm = max_norm
        if channels > 0:
            self.table = nn.Parameter(torch.zeros(channels, height, width))
        else:
            self.table = None

    def read(self) -> torch.Tensor:
        """The (C, H, W) planes as seen by the model, renormalized if needed."""
        if self.table is None:
            return torch.zeros(0, self.height, self.width)
        if self.max_norm is None:
            return self.table
        norms = torch.linalg.vector_norm(self.table, dim=0, keepdim=True)
        scale = torch.where(norms > self.max_norm, self.max_norm / norms,
                            torch.ones_like(norms))
        return self.table * scale

    def forward(self) -> torch.Tensor:
        return self.read()


def geo_embed_concat(bundle: FeatureBundle, emb: GeoEmbedding) -> FeatureBundle:
    """Append the embedding planes to a feature bundle and extend its manifest.

    This is the inspection/export path; during training the same ``read()``
    happens inside the model's forward so gradients reach the table.
    """
    if emb.channels == 0:
        return bundle
    _, height, width = bundle.input.shape
    if (emb.height, emb.width) != (height, width):
        raise ShapeError(f"embedding grid {emb.height}x{emb.width} does not match "
                         f"bundle {height}x{width}")
    planes = emb.read().detach().cpu().numpy().astype(np.float32)
    total = bundle.manifest.total_channels
    manifest = ChannelManifest(bundle.manifest.entries +
                               (ManifestEntry("geo_embedding", total, total + emb.channels),))
    return FeatureBundle(input=np.concatenate([bundle.input, planes], axis=0),
                         manifest=manifest)
