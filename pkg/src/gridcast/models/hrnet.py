"""Multi-branch high-resolution backbone.

Parallel branches run at resolutions 1, 1/2, 1/4, 1/8 with widths W, 2W, 4W,
8W. Every stage runs its per-branch blocks and ends with full pairwise fusion:
downsampling by chained stride-2 3x3 convolutions, upsampling by nearest
neighbor plus a 1x1 convolution, contributions summed and activated. The head
upsamples every branch to full resolution, concatenates, and applies a single
linear 1x1 projection, so spatial resolution is preserved end to end.
"""

from __future__ import annotations

import torch
from torch import nn

from ..errors import ConfigError
from .activations import make_activation
from .blocks import ConvBlock, conv1, conv3
from .config import BackboneConfig
from .norm import SyncableBatchNorm2d


def _down_path(widths, src: int, dst: int, activation) -> nn.Sequential:
    """Chain of stride-2 convolutions from branch src down to branch dst."""
    layers = []
    for step in range(src, dst):
        layers.append(conv3(widths[step], widths[step + 1], stride=2))
        layers.append(SyncableBatchNorm2d(widths[step + 1]))
        if step < dst - 1:
            layers.append(make_activation(activation))
    return nn.Sequential(*layers)


def _up_path(widths, src: int, dst: int) -> nn.Sequential:
    return nn.Sequential(
        nn.Upsample(scale_factor=2 ** (src - dst), mode="nearest"),
        conv1(widths[src], widths[dst]),
        SyncableBatchNorm2d(widths[dst]),
    )


class _Fusion(nn.Module):
    def __init__(self, widths, activation):
        super().__init__()
        self.n = len(widths)
        self.paths = nn.ModuleDict()
        for dst in range(self.n):
            for src in range(self.n):
                if src == dst:
                    continue
                path = (_down_path(widths, src, dst, activation) if src < dst
                        else _up_path(widths, src, dst))
                self.paths[f"{src}to{dst}"] = path
        self.act = make_activation(activation)

    def forward(self, xs):
        outs = []
        for dst in range(self.n):
            acc = xs[dst]
            for src in range(self.n):
                if src != dst:
                    acc = acc + self.paths[f"{src}to{dst}"](xs[src])
            outs.append(self.act(acc))
        return outs


class _Stage(nn.Module):
    def __init__(self, widths, prev_branches: int, branches: int, blocks: int, activation):
        super().__init__()
        self.branches = branches
        self.transitions = nn.ModuleList(
            ConvBlock(widths[j - 1], widths[j], activation, stride=2)
            for j in range(prev_branches, branches))
        self.blocks = nn.ModuleList(
            nn.Sequential(*[ConvBlock(widths[j], widths[j], activation) for _ in range(blocks)])
            for j in range(branches))
        self.fusion = _Fusion(widths[:branches], activation) if branches > 1 else None

    def forward(self, xs):
        xs = list(xs)
        for tr in self.transitions:
            xs.append(tr(xs[-1]))
        xs = [blk(x) for blk, x in zip(self.blocks, xs)]
        if self.fusion is not None:
            xs = self.fusion(xs)
        return xs


class HRNet(nn.Module):
    def __init__(self, config: BackboneConfig):
        super().__init__()
        if config.family != "hrnet":
            raise ConfigError(f"HRNet cannot be built from family {config.family!r}")
        self.config = config
        widths = [config.width * 2 ** j for j in range(config.max_branches)]
        self.stem = ConvBlock(config.in_channels, widths[0], config.activation)
        stages = []
        prev = 1
        for branches, blocks in config.stages:
            stages.append(_Stage(widths, prev, branches, blocks, config.activation))
            prev = branches
        self.stages = nn.ModuleList(stages)
        self.head_upsamples = nn.ModuleList(
            nn.Upsample(scale_factor=2 ** j, mode="nearest") if j > 0 else nn.Identity()
            for j in range(prev))
        self.project = conv1(sum(widths[:prev]), config.out_planes, bias=True)

    def forward(self, x: torch.Tensor) -> torch.Tensor:
        height, width = x.shape[-2:]
        divisor = self.config.resolution_divisor
        if height % divisor or width % divisor:
            raise ConfigError(
                f"input {height}x{width} not divisible by {divisor} "
                f"({self.config.max_branches} branches)")
        xs = [self.stem(x)]
        for stage in self.stages:
            xs = stage(xs)
        full = [up(t) for up, t in zip(self.head_upsamples, xs)]
        return self.project(torch.cat(full, dim=1))
