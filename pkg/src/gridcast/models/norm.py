"""Per-channel batch normalization with a statistics-synchronization hook.

The hook stands in for multi-device synchronized batch norm: when set, it is
called with the local batch statistics and may return statistics reduced
across training contexts. The default (no hook) is a single-process no-op.
The reduction itself must be a pure weighted mean, provided here as
:func:`reduce_batch_stats`.
"""

from __future__ import annotations

import torch
from torch import nn


def reduce_batch_stats(stats):
    """Combine per-context (mean, biased var, count) triples into global stats.

    Equivalent to computing mean and biased variance over the concatenation
    of all contexts' elements.
    """
    stats = list(stats)
    total = sum(count for _, _, count in stats)
    mean = sum(m * (n / total) for m, _, n in stats)
    second = sum((v + m * m) * (n / total) for m, v, n in stats)
    return mean, second - mean * mean


class SyncableBatchNorm2d(nn.Module):
    def __init__(self, num_features: int, eps: float = 1e-5, momentum: float = 0.1):
        super().__init__()
        self.num_features = num_features
        self.eps = eps
        self.momentum = momentum
        self.weight = nn.Parameter(torch.ones(num_features))
        self.bias = nn.Parameter(torch.zeros(num_features))
        self.register_buffer("running_mean", torch.zeros(num_features))
        self.register_buffer("running_var", torch.ones(num_features))
        self.sync_hook = None   # callable (mean, var, count) -> (mean, var)

    def forward(self, x: torch.Tensor) -> torch.Tensor:
        if self.training:
            count = x.numel() // x.shape[1]
            mean = x.mean(dim=(0, 2, 3))
            var = x.var(dim=(0, 2, 3), unbiased=False)
            if self.sync_hook is not None:
                mean, var = self.sync_hook(mean, var, count)
            with torch.no_grad():
                unbiased = var * (count / max(count - 1, 1))
                self.running_mean.mul_(1 - self.momentum).add_(self.momentum * mean)
                self.running_var.mul_(1 - self.momentum).add_(self.momentum * unbiased)
        else:
            mean, var = self.running_mean, self.running_var
        shape = (1, self.num_features, 1, 1)
        normed = (x - mean.view(shape)) / torch.sqrt(var.view(shape) + self.eps)
        return normed * self.weight.view(shape) + self.bias.view(shape)
