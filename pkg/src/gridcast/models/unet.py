"""Encoder-decoder backbone with skip connections.

Level j runs at 1/2^j resolution with width * 2^j channels. The decoder
upsamples by nearest neighbor plus a 1x1 convolution, concatenates the
encoder skip, and refines with the level's conv blocks. A depth-1 config
degenerates to a plain convolution stack. The head is a linear 1x1
projection, so the output resolution equals the input resolution.
"""

from __future__ import annotations

import torch
from torch import nn

from ..errors import ConfigError
from .activations import make_activation
from .blocks import ConvBlock, conv1
from .config import BackboneConfig
from .norm import SyncableBatchNorm2d


def _level(cin: int, cout: int, blocks: int, activation) -> nn.Sequential:
    mods = [ConvBlock(cin, cout, activation)]
    mods += [ConvBlock(cout, cout, activation) for _ in range(blocks - 1)]
    return nn.Sequential(*mods)


class UNet(nn.Module):
    def __init__(self, config: BackboneConfig):
        super().__init__()
        if config.family != "unet":
            raise ConfigError(f"UNet cannot be built from family {config.family!r}")
        self.config = config
        depth = len(config.stages)
        widths = [config.width * 2 ** j for j in range(depth)]

        self.encoders = nn.ModuleList()
        for j, blocks in enumerate(config.stages):
            cin = config.in_channels if j == 0 else widths[j - 1]
            self.encoders.append(_level(cin, widths[j], blocks, config.activation))
        self.pool = nn.MaxPool2d(2)

        self.upsamples = nn.ModuleList()
        self.decoders = nn.ModuleList()
        for j in range(depth - 2, -1, -1):
            self.upsamples.append(nn.Sequential(
                nn.Upsample(scale_factor=2, mode="nearest"),
                conv1(widths[j + 1], widths[j]),
                SyncableBatchNorm2d(widths[j]),
                make_activation(config.activation),
            ))
            self.decoders.append(_level(2 * widths[j], widths[j],
                                        config.stages[j], config.activation))
        self.project = conv1(widths[0], config.out_planes, bias=True)

    def forward(self, x: torch.Tensor) -> torch.Tensor:
        height, width = x.shape[-2:]
        divisor = self.config.resolution_divisor
        if height % divisor or width % divisor:
            raise ConfigError(
                f"input {height}x{width} not divisible by {divisor} "
                f"({len(self.config.stages)} levels)")
        skips = []
        for j, enc in enumerate(self.encoders):
            if j > 0:
                x = self.pool(x)
            x = enc(x)
            skips.append(x)
        depth = len(self.encoders)
        for i, (up, dec) in enumerate(zip(self.upsamples, self.decoders)):
            skip = skips[depth - 2 - i]
            x = dec(torch.cat([up(x), skip], dim=1))
        return self.project(x)
