"""Model construction, deterministic initialization, loss, and gradients."""

from __future__ import annotations

import math
from typing import Optional

import torch
from torch import nn

from ..errors import ConfigError, NumericError, ShapeError
from .config import BackboneConfig
from .geo import GeoConfig, GeoEmbedding
from .hrnet import HRNet
from .norm import SyncableBatchNorm2d
from .unet import UNet


class ForecastModel(nn.Module):
    """Optional geo-embedding concat followed by an image-to-image backbone."""

    def __init__(self, backbone: nn.Module, geo: Optional[GeoEmbedding] = None):
        super().__init__()
        self.backbone = backbone
        self.geo = geo

    @property
    def config(self) -> BackboneConfig:
        return self.backbone.config

    def forward(self, x: torch.Tensor) -> torch.Tensor:
        if self.geo is not None and self.geo.channels > 0:
            planes = self.geo.read().to(x.dtype).unsqueeze(0).expand(x.shape[0], -1, -1, -1)
            x = torch.cat([x, planes], dim=1)
        return self.backbone(x)


def build_backbone(config: BackboneConfig) -> nn.Module:
    return HRNet(config) if config.family == "hrnet" else UNet(config)


def init_parameters(model: nn.Module, seed: int) -> None:
    """Deterministic init: fan-in scaled uniform convolutions, zero biases,
    unit batch-norm scales, normal(0, 0.02) embedding tables."""
    gen = torch.Generator().manual_seed(seed)
    with torch.no_grad():
        for module in model.modules():
            if isinstance(module, nn.Conv2d):
                fan_in = module.in_channels * module.kernel_size[0] * module.kernel_size[1]
                bound = 1.0 / math.sqrt(fan_in)
                module.weight.uniform_(-bound, bound, generator=gen)
                if module.bias is not None:
                    module.bias.zero_()
            elif isinstance(module, SyncableBatchNorm2d):
                module.weight.fill_(1.0)
                module.bias.zero_()
                module.running_mean.zero_()
                module.running_var.fill_(1.0)
            elif isinstance(module, GeoEmbedding) and module.table is not None:
                module.table.normal_(0.0, 0.02, generator=gen)


def build_model(config: BackboneConfig, geo: Optional[GeoConfig],
                height: int, width: int, seed: int) -> ForecastModel:
    """Build and initialize a model whose total input is ``config.in_channels``.

    When a geo config with C > 0 is given, the backbone consumes the feature
    planes plus C embedding planes; ``config.in_channels`` must already count
    both (feature manifest plus C).
    """
    emb = None
    if geo is not None and geo.channels > 0:
        if config.in_channels <= geo.channels:
            raise ConfigError("in_channels must exceed the geo-embedding width")
        emb = GeoEmbedding(geo.channels, height, width, max_norm=geo.max_norm)
    model = ForecastModel(build_backbone(config), emb)
    init_parameters(model, seed)
    return model


def mse_loss(prediction: torch.Tensor, target: torch.Tensor) -> torch.Tensor:
    if prediction.shape != target.shape:
        raise ShapeError(f"prediction {tuple(prediction.shape)} vs target "
                         f"{tuple(target.shape)}")
    return ((prediction - target) ** 2).mean()


def model_gradients(model: nn.Module, inputs: torch.Tensor, targets: torch.Tensor,
                    batch_id=None) -> tuple[torch.Tensor, dict]:
    """One forward/backward pass; returns (loss, gradients by parameter name)."""
    loss = mse_loss(model(inputs), targets)
    if not torch.isfinite(loss):
        raise NumericError(f"non-finite loss on batch {batch_id!r}", batch_id=batch_id)
    model.zero_grad(set_to_none=True)
    loss.backward()
    grads = {}
    for name, param in model.named_parameters():
        grads[name] = (param.grad.detach().clone() if param.grad is not None
                       else torch.zeros_like(param))
    return loss.detach(), grads
