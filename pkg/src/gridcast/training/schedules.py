"""Linear warm-up followed by linear decay to zero."""

from __future__ import annotations

import math
from dataclasses import dataclass

from ..errors import ConfigError, DomainError


@dataclass(frozen=True)
class ScheduleConfig:
    total_steps: int
    warmup_fraction: float = 0.05

    def __post_init__(self):
        if self.total_steps <= 0:
            raise ConfigError("total_steps must be positive")
        if not 0.0 <= self.warmup_fraction < 1.0:
            raise ConfigError("warmup_fraction must lie in [0, 1)")

    @property
    def warmup_steps(self) -> int:
        return math.floor(self.warmup_fraction * self.total_steps)

    def to_dict(self) -> dict:
        return {"total_steps": self.total_steps, "warmup_fraction": self.warmup_fraction}


def lr_at(schedule: ScheduleConfig, step: int, lr_peak: float) -> float:
    """Learning rate at a step in [0, total_steps].

    Ramps linearly from 0 to ``lr_peak`` over the warm-up steps, then decays
    linearly to 0 at ``total_steps``. Zero warm-up degenerates to pure decay
    starting at the peak.
    """
    total = schedule.total_steps
    if not 0 <= step <= total:
        raise DomainError(f"step {step} outside [0, {total}]")
    warmup = schedule.warmup_steps
    if warmup > 0 and step <= warmup:
        return lr_peak * step / warmup
    return lr_peak * (total - step) / (total - warmup)
