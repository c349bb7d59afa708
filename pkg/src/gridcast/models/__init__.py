from .activations import ActivationKind, activation_apply, make_activation
from .blocks import ConvBlock
from .checkpoint import load_checkpoint, load_model, save_checkpoint
from .config import (BackboneConfig, hrnet_tiny, hrnet_w18, hrnet_w48, unet_tiny)
from .factory import (ForecastModel, build_backbone, build_model, init_parameters,
                      model_gradients, mse_loss)
from .geo import GeoConfig, GeoEmbedding, geo_embed_concat
from .hrnet import HRNet
from .norm import SyncableBatchNorm2d, reduce_batch_stats
from .unet import UNet

__all__ = [
    "ActivationKind", "activation_apply", "make_activation", "ConvBlock",
    "load_checkpoint", "load_model", "save_checkpoint", "BackboneConfig", "hrnet_tiny",
    "hrnet_w18", "hrnet_w48", "unet_tiny", "ForecastModel", "build_backbone",
    "build_model", "init_parameters", "model_gradients", "mse_loss",
    "GeoConfig", "GeoEmbedding", "geo_embed_concat", "HRNet",
    "SyncableBatchNorm2d", "reduce_batch_stats", "UNet",
]
