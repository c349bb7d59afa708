"""Core grid types, unit-scale conversion, and sample windowing.

A "traffic movie" is one day of one city rasterized as ``frames_per_day``
frames of shape ``(height, width, dynamic_channels)`` stored as uint8.
Raw values live in [0, 255]; the value 0 doubles as the missing marker.
Model-facing code always works on the unit scale [0, 1].
"""

from __future__ import annotations

import datetime as dt
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .errors import ConfigError, DomainError, ShapeError, WindowOutOfRangeError

#: Number of consecutive input frames a sample window always contains.
INPUT_FRAME_COUNT = 12

#: Default prediction offsets (frames past the anchor), 5 to 60 minutes.
DEFAULT_OFFSETS = (1, 2, 3, 6, 9, 12)


@dataclass(frozen=True)
class CityGridSpec:
    """Geometry of one city's grid; all tensors for the city must conform."""

    city_id: str
    height: int
    width: int
    frames_per_day: int = 288
    dynamic_channels: int = 9
    static_channels: int = 9

    def __post_init__(self):
        if not self.city_id:
            raise ConfigError("city_id must be a non-empty string")
        for name in ("height", "width", "frames_per_day", "dynamic_channels", "static_channels"):
            value = getattr(self, name)
            if not isinstance(value, int) or value <= 0:
                raise ConfigError(f"{name} must be a positive int, got {value!r}")

    @property
    def day_shape(self) -> tuple[int, int, int, int]:
        return (self.frames_per_day, self.height, self.width, self.dynamic_channels)

    @property
    def static_shape(self) -> tuple[int, int, int]:
        return (self.static_channels, self.height, self.width)

    def to_dict(self) -> dict:
        return {
            "city_id": self.city_id,
            "height": self.height,
            "width": self.width,
            "frames_per_day": self.frames_per_day,
            "dynamic_channels": self.dynamic_channels,
            "static_channels": self.static_channels,
        }

    @classmethod
    def from_dict(cls, doc: dict) -> "CityGridSpec":
        try:
            return cls(**{k: doc[k] for k in ("city_id", "height", "width", "frames_per_day",
                                              "dynamic_channels", "static_channels")})
        except KeyError as exc:
            raise ConfigError(f"grid spec document missing field {exc}") from exc


def _frozen_u8(values: np.ndarray, shape: tuple, what: str) -> np.ndarray:
    arr = np.asarray(values)
    if arr.dtype != np.uint8:
        raise ShapeError(f"{what} values must be uint8, got {arr.dtype}")
    if arr.shape != shape:
        raise ShapeError(f"{what} shape {arr.shape} does not match spec {shape}")
    arr = np.ascontiguousarray(arr)
    arr.setflags(write=False)
    return arr


@dataclass(frozen=True)
class DayTensor:
    """One day of one city: uint8 array (frames, H, W, dynamic_channels)."""

    spec: CityGridSpec
    date: dt.date
    values: np.ndarray = field(repr=False)

    def __post_init__(self):
        if not isinstance(self.date, dt.date):
            raise ConfigError(f"date must be a datetime.date, got {type(self.date).__name__}")
        object.__setattr__(self, "values", _frozen_u8(self.values, self.spec.day_shape, "day tensor"))


@dataclass(frozen=True)
class StaticTensor:
    """Time-invariant per-pixel layers for a city: uint8 (static_channels, H, W)."""

    spec: CityGridSpec
    values: np.ndarray = field(repr=False)

    def __post_init__(self):
        object.__setattr__(self, "values", _frozen_u8(self.values, self.spec.static_shape, "static tensor"))


def scale_to_unit(raw):
    """Map raw byte values in [0, 255] onto the unit interval (exact at endpoints)."""
    arr = np.asarray(raw)
    if arr.dtype != np.uint8 and (arr.min(initial=0) < 0 or arr.max(initial=0) > 255):
        raise DomainError("raw values must lie in [0, 255]")
    out = arr / np.float64(255.0)
    return float(out) if np.isscalar(raw) or arr.ndim == 0 else out


def quantize_from_unit(x):
    """Clamp to [0, 1] and quantize to uint8 with half-away-from-zero rounding."""
    arr = np.asarray(x, dtype=np.float64)
    clamped = np.clip(arr, 0.0, 1.0)
    out = np.floor(clamped * 255.0 + 0.5).astype(np.uint8)
    return int(out) if np.isscalar(x) or arr.ndim == 0 else out


@dataclass(frozen=True)
class SampleWindow:
    """Unit-scaled model sample: 12 input frames and targets at fixed offsets."""

    input_frames: np.ndarray   # (12, H, W, C) float32 in [0, 1]
    target_frames: np.ndarray  # (len(offsets), H, W, C) float32 in [0, 1]
    anchor: tuple[dt.date, int]
    offsets: tuple[int, ...]


def _check_days(days: Sequence[DayTensor]) -> None:
    if not days:
        raise WindowOutOfRangeError("no day tensors supplied")
    spec = days[0].spec
    for prev, cur in zip(days, days[1:]):
        if cur.spec != spec:
            raise ShapeError("all day tensors must share one grid spec")
        if (cur.date - prev.date).days != 1:
            raise WindowOutOfRangeError(
                f"day tensors must be consecutive; gap between {prev.date} and {cur.date}")


def slice_window(days: Sequence[DayTensor], date: dt.date, t: int,
                 offsets: Sequence[int] = DEFAULT_OFFSETS) -> SampleWindow:
    """Cut one sample window out of an ordered run of consecutive days.

    Inputs are the 12 frames ending at frame ``t`` of ``date`` (so ``t >= 11``);
    targets are the frames at ``t + offset`` for every offset, stitching into
    following days when an offset crosses midnight.
    """
    _check_days(days)
    spec = days[0].spec
    frames = spec.frames_per_day
    offsets = tuple(int(o) for o in offsets)
    if not offsets or any(o <= 0 for o in offsets):
        raise ConfigError(f"offsets must be positive ints, got {offsets}")
    if not 0 <= t < frames:
        raise DomainError(f"frame index {t} outside [0, {frames})")

    index = {d.date: i for i, d in enumerate(days)}
    if date not in index:
        raise WindowOutOfRangeError(f"{date} not among supplied days")
    day_i = index[date]
    if t < INPUT_FRAME_COUNT - 1:
        raise WindowOutOfRangeError(
            f"frame {t} of {date} has fewer than {INPUT_FRAME_COUNT} history frames")

    last_global = day_i * frames + t + max(offsets)
    if last_global >= len(days) * frames:
        raise WindowOutOfRangeError(
            f"target offset {max(offsets)} past frame {t} of {date} exceeds supplied days")

    inputs = days[day_i].values[t - INPUT_FRAME_COUNT + 1: t + 1]
    targets = np.empty((len(offsets), spec.height, spec.width, spec.dynamic_channels),
                       dtype=np.uint8)
    for k, off in enumerate(offsets):
        di, ti = divmod(day_i * frames + t + off, frames)
        targets[k] = days[di].values[ti]

    return SampleWindow(
        input_frames=scale_to_unit(inputs).astype(np.float32),
        target_frames=scale_to_unit(targets).astype(np.float32),
        anchor=(date, t),
        offsets=offsets,
    )
