"""Day stores and training-sample assembly.

A day store resolves dates to :class:`DayTensor` objects (or reports absence)
and owns the city's static tensor. ``build_dataset`` runs the full feature
pipeline for a list of (date, frame) anchors and stacks the results into
arrays ready for batching. Per-sample randomness is seeded from
(seed, date, frame), so samples are reproducible regardless of build order.
"""

from __future__ import annotations

import datetime as dt
import json
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Iterable, Optional, Protocol

import numpy as np

from . import storage
from .calendars import HolidayCalendar, encode_time, is_holiday, weekday_onehot
from .errors import ConfigError, DataError
from .features import (ChannelManifest, DaySet, FeatureBundle, ManifestEntry,
                       assemble_input, daily_stats_full, periodic_feature, stat_count,
                       DEFAULT_GROUP_ORDER)
from .grids import CityGridSpec, DayTensor, StaticTensor, DEFAULT_OFFSETS, slice_window


class DayStore(Protocol):
    spec: CityGridSpec

    def get_day(self, date: dt.date) -> Optional[DayTensor]: ...

    def get_static(self) -> StaticTensor: ...


@dataclass
class InMemoryDayStore:
    spec: CityGridSpec
    days: dict
    static: StaticTensor

    def get_day(self, date: dt.date) -> Optional[DayTensor]:
        return self.days.get(date)

    def get_static(self) -> StaticTensor:
        return self.static

    def dates(self) -> list:
        return sorted(self.days)


class DirectoryDayStore:
    """Reads ``<root>/<city>/`` written by :func:`write_city` or the CLI."""

    def __init__(self, root, city: str):
        self.root = Path(root)
        self.city = city
        spec_file = self.root / city / "spec.json"
        if not spec_file.exists():
            raise DataError(f"no spec.json under {self.root / city}")
        self.spec = CityGridSpec.from_dict(json.loads(spec_file.read_text("utf-8")))
        self._cache: dict = {}
        self._static: Optional[StaticTensor] = None

    def get_day(self, date: dt.date) -> Optional[DayTensor]:
        if date not in self._cache:
            path = storage.day_path(self.root, self.city, date)
            self._cache[date] = storage.load_day(path, self.spec) if path.exists() else None
        return self._cache[date]

    def get_static(self) -> StaticTensor:
        if self._static is None:
            self._static = storage.load_static(storage.static_path(self.root, self.city), self.spec)
        return self._static

    def dates(self) -> list:
        return sorted(dt.date.fromisoformat(p.stem)
                      for p in (self.root / self.city).glob("*.grid") if p.stem != "static")


def write_city(root, store: DayStore, calendar: Optional[HolidayCalendar] = None,
               dates: Optional[Iterable[dt.date]] = None) -> Path:
    """Persist a day store (and optionally its calendar) in the directory layout."""
    root = Path(root)
    city_dir = root / store.spec.city_id
    city_dir.mkdir(parents=True, exist_ok=True)
    (city_dir / "spec.json").write_text(json.dumps(store.spec.to_dict(), indent=2) + "\n", "utf-8")
    storage.store_static(store.get_static(), storage.static_path(root, store.spec.city_id))
    for date in (dates if dates is not None else store.dates()):
        day = store.get_day(date)
        if day is not None:
            storage.store_day(day, storage.day_path(root, store.spec.city_id, date))
    if calendar is not None:
        from .calendars import store_calendar
        store_calendar(calendar, city_dir / "calendar.json")
    return city_dir


def compute_fill_stats(store: DayStore, dates: Iterable[dt.date]) -> Optional[np.ndarray]:
    """City-wide mean of each daily statistic over the given dates.

    Used to fill periodic-feature planes for days missing from the store.
    Returns None when none of the dates resolve (callers then fill with 0).
    """
    per_day = []
    for date in dates:
        day = store.get_day(date)
        if day is not None:
            per_day.append(daily_stats_full(day).values.mean(axis=(1, 2)))
    if not per_day:
        return None
    return np.mean(per_day, axis=0)


@dataclass(frozen=True)
class FeatureConfig:
    """Which feature groups enter the assembled input (dynamic is always on)."""

    include_static: bool = True
    include_periodic: bool = True
    include_time: bool = True
    include_weekday: bool = True
    include_holiday: bool = True
    day_offsets: tuple = DaySet().offsets
    order: tuple = DEFAULT_GROUP_ORDER

    @property
    def day_set(self) -> DaySet:
        return DaySet(self.day_offsets)

    def to_dict(self) -> dict:
        return {
            "include_static": self.include_static,
            "include_periodic": self.include_periodic,
            "include_time": self.include_time,
            "include_weekday": self.include_weekday,
            "include_holiday": self.include_holiday,
            "day_offsets": list(self.day_offsets),
            "order": list(self.order),
        }

    @classmethod
    def from_dict(cls, doc: dict) -> "FeatureConfig":
        kwargs = dict(doc)
        if "day_offsets" in kwargs:
            kwargs["day_offsets"] = tuple(kwargs["day_offsets"])
        if "order" in kwargs:
            kwargs["order"] = tuple(kwargs["order"])
        try:
            return cls(**kwargs)
        except TypeError as exc:
            raise ConfigError(f"bad feature config: {exc}") from exc


@dataclass(frozen=True)
class Anchor:
    date: dt.date
    t: int


def sample_rng(seed: int, date: dt.date, t: int) -> np.random.Generator:
    """Per-sample generator derived from (seed, date, frame index)."""
    return np.random.default_rng(np.random.SeedSequence([seed, date.toordinal(), t]))


def default_anchors(dates: Iterable[dt.date], frames_per_day: int,
                    offsets=DEFAULT_OFFSETS, per_day: int = 4) -> list:
    """Evenly spread anchors whose windows stay inside their own day."""
    lo = 11
    hi = frames_per_day - 1 - max(offsets)
    if hi < lo:
        raise ConfigError("day too short for the requested offsets")
    ts = np.linspace(lo, hi, num=per_day, dtype=int)
    return [Anchor(date=d, t=int(t)) for d in dates for t in ts]


@dataclass
class Dataset:
    """Assembled samples: inputs (N, C, H, W) and targets (N, K, H, W), float32."""

    inputs: np.ndarray
    targets: np.ndarray
    anchors: list
    manifest: ChannelManifest
    offsets: tuple

    def __len__(self) -> int:
        return len(self.anchors)


def build_sample(store: DayStore, calendar: HolidayCalendar, anchor: Anchor, *,
                 mode: str, seed: int, offsets=DEFAULT_OFFSETS,
                 features: FeatureConfig = FeatureConfig(),
                 fill_stats: Optional[np.ndarray] = None) -> tuple[FeatureBundle, np.ndarray]:
    spec = store.spec
    frames = spec.frames_per_day
    need_next = anchor.t + max(offsets) >= frames
    days = [store.get_day(anchor.date)]
    if days[0] is None:
        raise DataError(f"store has no day tensor for {anchor.date}")
    if need_next:
        nxt = store.get_day(anchor.date + dt.timedelta(days=1))
        if nxt is None:
            raise DataError(f"window at ({anchor.date}, t={anchor.t}) needs the following day")
        days.append(nxt)

    window = slice_window(days, anchor.date, anchor.t, offsets)
    rng = sample_rng(seed, anchor.date, anchor.t)
    periodic = None
    if features.include_periodic:
        periodic = periodic_feature(anchor.date, store, mode, rng,
                                    day_set=features.day_set, fill_stats=fill_stats)
    bundle = assemble_input(
        window,
        store.get_static() if features.include_static else None,
        periodic,
        encode_time(anchor.t, frames) if features.include_time else None,
        weekday_onehot(anchor.date) if features.include_weekday else None,
        is_holiday(calendar, anchor.date) if features.include_holiday else None,
        order=features.order,
        day_set=features.day_set,
    )
    n_out, height, width, channels = window.target_frames.shape
    target = window.target_frames.transpose(0, 3, 1, 2).reshape(n_out * channels, height, width)
    return bundle, target


def build_dataset(store: DayStore, calendar: HolidayCalendar, anchors: Iterable[Anchor], *,
                  mode: str, seed: int, offsets=DEFAULT_OFFSETS,
                  features: FeatureConfig = FeatureConfig(),
                  fill_stats: Optional[np.ndarray] = None) -> Dataset:
    anchors = list(anchors)
    if not anchors:
        raise ConfigError("no anchors supplied")
    inputs = []
    targets = []
    manifest = None
    for anchor in anchors:
        bundle, target = build_sample(store, calendar, anchor, mode=mode, seed=seed,
                                      offsets=offsets, features=features,
                                      fill_stats=fill_stats)
        inputs.append(bundle.input)
        targets.append(target)
        manifest = bundle.manifest
    return Dataset(inputs=np.stack(inputs), targets=np.stack(targets).astype(np.float32),
                   anchors=anchors, manifest=manifest, offsets=tuple(offsets))


def drop_channel_group(dataset: Dataset, group: str) -> Dataset:
    """Dataset view without the planes of one feature group (e.g. "periodic")."""
    keep_rows = []
    entries = []
    cursor = 0
    dropped = 0
    for e in dataset.manifest.entries:
        base = e.tag.split("[")[0]
        if base == group:
            dropped += e.stop - e.start
            continue
        keep_rows.extend(range(e.start, e.stop))
        entries.append(ManifestEntry(e.tag, cursor, cursor + (e.stop - e.start)))
        cursor = entries[-1].stop
    if dropped == 0:
        raise ConfigError(f"dataset has no feature group {group!r} to drop")
    return replace(dataset,
                   inputs=np.ascontiguousarray(dataset.inputs[:, keep_rows]),
                   manifest=ChannelManifest(tuple(entries)))
