"""Shared convolution building blocks."""

from __future__ import annotations

from torch import nn

from .activations import ActivationKind, make_activation
from .norm import SyncableBatchNorm2d


def conv3(cin: int, cout: int, stride: int = 1) -> nn.Conv2d:
    return nn.Conv2d(cin, cout, kernel_size=3, stride=stride, padding=1, bias=False)


def conv1(cin: int, cout: int, bias: bool = False) -> nn.Conv2d:
    return nn.Conv2d(cin, cout, kernel_size=1, bias=bias)


class ConvBlock(nn.Module):
    """3x3 convolution (bias folded into the norm) + batch norm + activation."""

    def __init__(self, cin: int, cout: int, activation: ActivationKind, stride: int = 1):
        super().__init__()
        self.conv = conv3(cin, cout, stride=stride)
        self.norm = SyncableBatchNorm2d(cout)
        self.act = make_activation(activation)

    def forward(self, x):
        return self.act(self.norm(self.conv(x)))
