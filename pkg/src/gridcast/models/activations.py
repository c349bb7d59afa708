"""Hidden-layer activation variants used throughout both backbones."""

from __future__ import annotations

import math
from dataclasses import dataclass

from torch import nn

from ..errors import ConfigError

VARIANTS = ("relu", "elu", "relu6", "leaky_relu")


@dataclass(frozen=True)
class ActivationKind:
    variant: str
    slope: float = 0.01   # leaky_relu only

    def __post_init__(self):
        if self.variant not in VARIANTS:
            raise ConfigError(f"unknown activation {self.variant!r}, choose from {VARIANTS}")
        if self.variant == "leaky_relu" and not 0.0 < self.slope < 1.0:
            raise ConfigError(f"leaky_relu slope must lie in (0, 1), got {self.slope}")

    def to_dict(self) -> dict:
        return {"variant": self.variant, "slope": self.slope}

    @classmethod
    def from_dict(cls, doc) -> "ActivationKind":
        if isinstance(doc, str):
            return cls(variant=doc)
        return cls(variant=doc["variant"], slope=doc.get("slope", 0.01))


def activation_apply(kind: ActivationKind, x: float) -> float:
    """Scalar reference semantics; the nn modules must agree with this."""
    if kind.variant == "relu":
        return max(0.0, x)
    if kind.variant == "elu":
        return x if x > 0 else math.exp(x) - 1.0
    if kind.variant == "relu6":
        return min(max(0.0, x), 6.0)
    return x if x > 0 else kind.slope * x


def make_activation(kind: ActivationKind) -> nn.Module:
    if kind.variant == "relu":
        return nn.ReLU()
    if kind.variant == "elu":
        return nn.ELU()
    if kind.variant == "relu6":
        return nn.ReLU6()
    return nn.LeakyReLU(negative_slope=kind.slope)
