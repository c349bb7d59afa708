"""Backbone architecture descriptions and named presets."""

from __future__ import annotations

from dataclasses import dataclass, replace

from ..errors import ConfigError
from .activations import ActivationKind

FAMILIES = ("hrnet", "unet")
MAX_BRANCHES = 4


@dataclass(frozen=True)
class BackboneConfig:
    """Architecture description; parameter count is a pure function of this.

    ``stages`` depends on the family: for hrnet a tuple of (branches, blocks)
    pairs with non-decreasing branch counts; for unet a tuple of block counts,
    one per resolution level. Branch/level ``j`` runs at 1/2^j resolution with
    ``width * 2^j`` channels. ``in_channels`` counts the full model input,
    i.e. the feature manifest plus any geo-embedding planes.
    """

    family: str
    width: int
    stages: tuple
    in_channels: int
    out_frames: int
    out_channels: int
    activation: ActivationKind = ActivationKind("elu")

    def __post_init__(self):
        if self.family not in FAMILIES:
            raise ConfigError(f"unknown backbone family {self.family!r}")
        for name in ("width", "in_channels", "out_frames", "out_channels"):
            if getattr(self, name) <= 0:
                raise ConfigError(f"{name} must be positive")
        if not self.stages:
            raise ConfigError("stages must be non-empty")
        stages = tuple(tuple(s) if isinstance(s, (list, tuple)) else s for s in self.stages)
        object.__setattr__(self, "stages", stages)
        if self.family == "hrnet":
            prev = 1
            for s in stages:
                if not (isinstance(s, tuple) and len(s) == 2):
                    raise ConfigError(f"hrnet stage must be (branches, blocks), got {s!r}")
                branches, blocks = s
                if not 1 <= branches <= MAX_BRANCHES:
                    raise ConfigError(f"hrnet supports 1..{MAX_BRANCHES} branches, got {branches}")
                if branches < prev:
                    raise ConfigError("hrnet branch counts must be non-decreasing across stages")
                if blocks < 1:
                    raise ConfigError("hrnet stage needs at least one block")
                prev = branches
        else:
            for blocks in stages:
                if not isinstance(blocks, int) or blocks < 1:
                    raise ConfigError(f"unet stage block counts must be positive ints, got {blocks!r}")

    @property
    def out_planes(self) -> int:
        return self.out_frames * self.out_channels

    @property
    def max_branches(self) -> int:
        if self.family == "hrnet":
            return max(b for b, _ in self.stages)
        return len(self.stages)

    @property
    def resolution_divisor(self) -> int:
        return 2 ** (self.max_branches - 1)

    def with_in_channels(self, in_channels: int) -> "BackboneConfig":
        return replace(self, in_channels=in_channels)

    def to_dict(self) -> dict:
        return {
            "family": self.family,
            "width": self.width,
            "stages": [list(s) if isinstance(s, tuple) else s for s in self.stages],
            "in_channels": self.in_channels,
            "out_frames": self.out_frames,
            "out_channels": self.out_channels,
            "activation": self.activation.to_dict(),
        }

    @classmethod
    def from_dict(cls, doc: dict) -> "BackboneConfig":
        try:
            return cls(
                family=doc["family"],
                width=doc["width"],
                stages=tuple(tuple(s) if isinstance(s, list) else s for s in doc["stages"]),
                in_channels=doc["in_channels"],
                out_frames=doc["out_frames"],
                out_channels=doc["out_channels"],
                activation=ActivationKind.from_dict(doc.get("activation", "elu")),
            )
        except KeyError as exc:
            raise ConfigError(f"backbone config missing field {exc}") from exc


def hrnet_w18(in_channels: int, out_frames: int, out_channels: int,
              activation: ActivationKind = ActivationKind("elu")) -> BackboneConfig:
    """Four-branch variant with the published 18/36/72/144 branch widths."""
    return BackboneConfig(family="hrnet", width=18,
                          stages=((1, 2), (2, 2), (3, 2), (4, 2)),
                          in_channels=in_channels, out_frames=out_frames,
                          out_channels=out_channels, activation=activation)


def hrnet_w48(in_channels: int, out_frames: int, out_channels: int,
              activation: ActivationKind = ActivationKind("elu")) -> BackboneConfig:
    """Four-branch variant with the published 48/96/192/384 branch widths."""
    return BackboneConfig(family="hrnet", width=48,
                          stages=((1, 2), (2, 2), (3, 2), (4, 2)),
                          in_channels=in_channels, out_frames=out_frames,
                          out_channels=out_channels, activation=activation)


def hrnet_tiny(in_channels: int, out_frames: int, out_channels: int, width: int = 6,
               activation: ActivationKind = ActivationKind("elu")) -> BackboneConfig:
    """Two-branch desk-scale configuration for smoke runs and ablations."""
    return BackboneConfig(family="hrnet", width=width,
                          stages=((1, 1), (2, 1)),
                          in_channels=in_channels, out_frames=out_frames,
                          out_channels=out_channels, activation=activation)


def unet_tiny(in_channels: int, out_frames: int, out_channels: int, width: int = 8,
              depth: int = 2, blocks: int = 1,
              activation: ActivationKind = ActivationKind("elu")) -> BackboneConfig:
    return BackboneConfig(family="unet", width=width, stages=(blocks,) * depth,
                          in_channels=in_channels, out_frames=out_frames,
                          out_channels=out_channels, activation=activation)
