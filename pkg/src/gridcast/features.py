"""Daily-statistics features and model-input assembly.

For a prediction day D the periodic feature block stacks 10 per-pixel daily
statistics for each of the eight neighbor days {D-7, D-3, D-2, D-1, D+1, D+2,
D+3, D+7}: one mean per dynamic channel plus the fraction of frames in which
the pixel carries any data. Statistics are either computed over the full day
or estimated from 1-4 randomly placed 12-frame blocks.

``assemble_input`` concatenates all feature groups into a single (C, H, W)
tensor and records a channel manifest mapping every index range back to its
semantic source, so any plane can be recovered by name.
"""

from __future__ import annotations

import datetime as dt
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np

from .calendars import TimeOfDayEncoding
from .errors import ConfigError, DomainError, ShapeError
from .grids import DayTensor, SampleWindow, StaticTensor, scale_to_unit

DEFAULT_DAY_OFFSETS = (-7, -3, -2, -1, 1, 2, 3, 7)
SAMPLE_BLOCK_FRAMES = 12
MAX_SAMPLE_BLOCKS = 4

DEFAULT_GROUP_ORDER = ("dynamic", "static", "periodic", "time", "weekday", "holiday")


@dataclass(frozen=True)
class DaySet:
    """Signed day offsets contributing periodic statistics; never contains 0."""

    offsets: tuple = DEFAULT_DAY_OFFSETS

    def __post_init__(self):
        if len(set(self.offsets)) != len(self.offsets):
            raise ConfigError(f"duplicate day offsets in {self.offsets}")
        if 0 in self.offsets:
            raise ConfigError("day offset 0 (the prediction day itself) is not allowed")


def periodic_day_set(date: dt.date, day_set: DaySet = DaySet()) -> list:
    """Dates contributing periodic features for prediction day ``date``, in offset order."""
    return [date + dt.timedelta(days=o) for o in day_set.offsets]


@dataclass(frozen=True)
class DailyStats:
    """Per-pixel statistics of one day: (n_stats, H, W) in [0, 1].

    Stats 0..C-1 are the per-channel daily means, stat C is the fraction of
    frames in which at least one channel at the pixel is nonzero.
    """

    values: np.ndarray
    source_date: dt.date
    mode: str                      # "full_day" or "sampled"
    sample_k: Optional[int] = None
    sample_starts: Optional[tuple] = None


def stat_count(dynamic_channels: int) -> int:
    return dynamic_channels + 1


def _stats_over_frames(day: DayTensor, frame_idx: np.ndarray) -> np.ndarray:
    """Exact integer-sum statistics over a multiset of frame indices."""
    vals = day.values[frame_idx]          # (n, H, W, C), duplicates kept
    n = len(frame_idx)
    sums = vals.sum(axis=0, dtype=np.int64)                     # (H, W, C)
    means = sums.transpose(2, 0, 1) / np.float64(255 * n)       # (C, H, W)
    nonzero = (vals != 0).any(axis=3).sum(axis=0, dtype=np.int64)
    validity = nonzero[None, :, :] / np.float64(n)
    return np.concatenate([means, validity], axis=0)


def daily_stats_full(day: DayTensor) -> DailyStats:
    """Statistics over every frame of the day."""
    frames = np.arange(day.spec.frames_per_day)
    return DailyStats(values=_stats_over_frames(day, frames),
                      source_date=day.date, mode="full_day")


def daily_stats_sampled(day: DayTensor, rng: np.random.Generator) -> DailyStats:
    """Estimate the daily statistics from 1-4 random 12-frame blocks.

    Block starts are independent and uniform over [0, frames_per_day - 12];
    overlapping blocks count shared frames once per occurrence, which keeps
    the estimator a plain average over uniformly placed blocks.
    """
    frames = day.spec.frames_per_day
    if frames < MAX_SAMPLE_BLOCKS * SAMPLE_BLOCK_FRAMES:
        raise DomainError(f"sampled statistics need at least "
                          f"{MAX_SAMPLE_BLOCKS * SAMPLE_BLOCK_FRAMES} frames per day, got {frames}")
    k = int(rng.integers(1, MAX_SAMPLE_BLOCKS + 1))
    starts = rng.integers(0, frames - SAMPLE_BLOCK_FRAMES + 1, size=k)
    frame_idx = np.concatenate([np.arange(s, s + SAMPLE_BLOCK_FRAMES) for s in starts])
    return DailyStats(values=_stats_over_frames(day, frame_idx),
                      source_date=day.date, mode="sampled",
                      sample_k=k, sample_starts=tuple(int(s) for s in starts))


def periodic_feature(date: dt.date, store, mode: str, rng: np.random.Generator,
                     day_set: DaySet = DaySet(),
                     fill_stats: Optional[np.ndarray] = None) -> np.ndarray:
    """Stack the day-set statistics into (len(day_set) * n_stats, H, W).

    ``mode="train"`` estimates every day's statistics by sampling, mirroring
    what is available at test time; ``mode="test"`` samples only future days
    (offset > 0) and uses full-day statistics for past days. Days the store
    cannot resolve fall back to ``fill_stats`` (one value per statistic), or
    zero if no fill values exist.
    """
    if mode not in ("train", "test"):
        raise ConfigError(f"mode must be 'train' or 'test', got {mode!r}")
    spec = store.spec
    n_stats = stat_count(spec.dynamic_channels)
    planes = np.empty((len(day_set.offsets) * n_stats, spec.height, spec.width),
                      dtype=np.float64)
    for i, offset in enumerate(day_set.offsets):
        day = store.get_day(date + dt.timedelta(days=offset))
        block = slice(i * n_stats, (i + 1) * n_stats)
        if day is None:
            if fill_stats is None:
                planes[block] = 0.0
            else:
                planes[block] = np.asarray(fill_stats, dtype=np.float64)[:, None, None]
            continue
        if mode == "train" or offset > 0:
            stats = daily_stats_sampled(day, rng)
        else:
            stats = daily_stats_full(day)
        planes[block] = stats.values
    return planes


@dataclass(frozen=True)
class ManifestEntry:
    tag: str
    start: int
    stop: int


@dataclass(frozen=True)
class ChannelManifest:
    """Contiguous, disjoint index ranges covering [0, total_channels)."""

    entries: tuple

    def __post_init__(self):
        cursor = 0
        seen = set()
        for e in self.entries:
            if e.start != cursor or e.stop <= e.start:
                raise ShapeError(f"manifest entry {e.tag!r} [{e.start},{e.stop}) breaks contiguity "
                                 f"at channel {cursor}")
            if e.tag in seen:
                raise ShapeError(f"duplicate manifest tag {e.tag!r}")
            seen.add(e.tag)
            cursor = e.stop
        object.__setattr__(self, "entries", tuple(self.entries))

    @property
    def total_channels(self) -> int:
        return self.entries[-1].stop if self.entries else 0

    @property
    def tags(self) -> tuple:
        return tuple(e.tag for e in self.entries)

    def range_for(self, tag: str) -> tuple[int, int]:
        for e in self.entries:
            if e.tag == tag:
                return (e.start, e.stop)
        raise KeyError(f"no manifest entry tagged {tag!r}")

    def to_json(self) -> list:
        return [{"tag": e.tag, "start": e.start, "stop": e.stop} for e in self.entries]

    @classmethod
    def from_json(cls, doc: list) -> "ChannelManifest":
        return cls(tuple(ManifestEntry(d["tag"], d["start"], d["stop"]) for d in doc))


@dataclass(frozen=True)
class FeatureBundle:
    """Assembled model input (channels, H, W) plus its channel manifest."""

    input: np.ndarray
    manifest: ChannelManifest

    def __post_init__(self):
        if self.input.ndim != 3:
            raise ShapeError(f"bundle input must be (C, H, W), got shape {self.input.shape}")
        if self.input.shape[0] != self.manifest.total_channels:
            raise ShapeError(f"bundle has {self.input.shape[0]} channels but manifest covers "
                             f"{self.manifest.total_channels}")

    def planes(self, tag: str) -> np.ndarray:
        start, stop = self.manifest.range_for(tag)
        return self.input[start:stop]


def _broadcast(value: float, height: int, width: int) -> np.ndarray:
    return np.full((1, height, width), value, dtype=np.float64)


def assemble_input(window: SampleWindow,
                   static: Optional[StaticTensor],
                   periodic: Optional[np.ndarray],
                   time: Optional[TimeOfDayEncoding],
                   weekday: Optional[np.ndarray],
                   holiday: Optional[bool],
                   order: Sequence[str] = DEFAULT_GROUP_ORDER,
                   day_set: DaySet = DaySet()) -> FeatureBundle:
    """Concatenate feature groups into one plane stack with a manifest.

    Groups passed as None are left out. The default full stack is 12*9=108
    dynamic planes (oldest frame first, channel-major within each frame),
    9 static, 80 periodic, 2 time, 7 weekday and 1 holiday plane: 207 total.
    """
    n_in, height, width, channels = window.input_frames.shape
    groups: dict[str, list[tuple[str, np.ndarray]]] = {}

    dyn = window.input_frames.transpose(0, 3, 1, 2).reshape(n_in * channels, height, width)
    groups["dynamic"] = [("dynamic", dyn)]

    if static is not None:
        groups["static"] = [("static", scale_to_unit(static.values))]
    if periodic is not None:
        n_stats = periodic.shape[0] // len(day_set.offsets)
        if periodic.shape != (n_stats * len(day_set.offsets), height, width):
            raise ShapeError(f"periodic block shape {periodic.shape} does not fit "
                             f"{len(day_set.offsets)} offsets on a {height}x{width} grid")
        groups["periodic"] = [
            (f"periodic[{o:+d}]", periodic[i * n_stats:(i + 1) * n_stats])
            for i, o in enumerate(day_set.offsets)
        ]
    if time is not None:
        groups["time"] = [("time", np.concatenate([
            _broadcast(time.cos_component, height, width),
            _broadcast(time.sin_component, height, width),
        ]))]
    if weekday is not None:
        weekday = np.asarray(weekday, dtype=np.float64)
        if weekday.shape != (7,):
            raise ShapeError(f"weekday vector must have shape (7,), got {weekday.shape}")
        groups["weekday"] = [("weekday", np.repeat(weekday[:, None, None], height, axis=1)
                              .repeat(width, axis=2))]
    if holiday is not None:
        groups["holiday"] = [("holiday", _broadcast(1.0 if holiday else 0.0, height, width))]

    unknown = set(order) - set(DEFAULT_GROUP_ORDER)
    if unknown:
        raise ConfigError(f"unknown feature groups in order: {sorted(unknown)}")
    if "dynamic" not in order:
        raise ConfigError("feature order must include the dynamic group")

    planes = []
    entries = []
    cursor = 0
    for group in order:
        for tag, block in groups.get(group, []):
            if block.shape[1:] != (height, width):
                raise ShapeError(f"{tag} planes are {block.shape[1:]}, window is {(height, width)}")
            planes.append(block.astype(np.float32))
            entries.append(ManifestEntry(tag, cursor, cursor + block.shape[0]))
            cursor += block.shape[0]

    return FeatureBundle(input=np.concatenate(planes, axis=0),
                         manifest=ChannelManifest(tuple(entries)))
