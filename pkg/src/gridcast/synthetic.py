"""Deterministic synthetic-city generation for tests and desk-scale runs.

Each pixel gets a fixed amplitude per channel and a fixed phase (derived from
the seed and the city only, so the road layout persists across days). A day's
signal is a diurnal sinusoid scaled by a weekday/holiday factor plus seeded
per-frame noise, quantized to [0, 255]. A configurable fraction of pixels is
always zero, standing in for cells without roads.
"""

from __future__ import annotations

import datetime as dt
import hashlib
from dataclasses import dataclass

import numpy as np

from .calendars import HolidayCalendar
from .errors import ConfigError
from .grids import CityGridSpec, DayTensor, StaticTensor, quantize_from_unit


@dataclass(frozen=True)
class SyntheticConfig:
    noise: float = 0.1
    no_road_fraction: float = 0.1
    weekday_profile: tuple = (1.0, 1.0, 1.0, 1.0, 1.0, 0.6, 0.6)
    holiday_scale: float = 0.5
    amplitude_range: tuple = (0.25, 0.95)
    holiday_fraction: float = 0.05

    def __post_init__(self):
        if not 0.0 <= self.no_road_fraction <= 1.0:
            raise ConfigError("no_road_fraction must lie in [0, 1]")
        if self.noise < 0:
            raise ConfigError("noise must be non-negative")
        if len(self.weekday_profile) != 7:
            raise ConfigError("weekday_profile needs 7 entries (Monday first)")
        lo, hi = self.amplitude_range
        if not 0.0 <= lo <= hi <= 1.0:
            raise ConfigError("amplitude_range must be ordered within [0, 1]")


def _city_key(city_id: str) -> int:
    return int.from_bytes(hashlib.sha256(city_id.encode("utf-8")).digest()[:8], "big")


def pixel_parameters(spec: CityGridSpec, seed: int, config: SyntheticConfig = SyntheticConfig()):
    """Per-pixel amplitude (H, W, C), phase (H, W), and boolean road mask (H, W)."""
    rng = np.random.default_rng(np.random.SeedSequence([seed, _city_key(spec.city_id), 0x51D]))
    lo, hi = config.amplitude_range
    amplitude = rng.uniform(lo, hi, size=(spec.height, spec.width, spec.dynamic_channels))
    phase = rng.uniform(0.0, 2.0 * np.pi, size=(spec.height, spec.width))
    n_pixels = spec.height * spec.width
    n_blocked = int(round(config.no_road_fraction * n_pixels))
    road = np.ones(n_pixels, dtype=bool)
    road[rng.permutation(n_pixels)[:n_blocked]] = False
    return amplitude, phase, road.reshape(spec.height, spec.width)


def day_factor(date: dt.date, config: SyntheticConfig = SyntheticConfig(),
               holidays=frozenset()) -> float:
    """Scale applied to the whole day's signal (weekday profile or holiday)."""
    if date in holidays:
        return config.holiday_scale
    return config.weekday_profile[date.weekday()]


def generate_synthetic_day(spec: CityGridSpec, date: dt.date, seed: int,
                           config: SyntheticConfig = SyntheticConfig(),
                           holidays=frozenset()) -> DayTensor:
    """Pure function of (spec, date, seed, config, holidays)."""
    amplitude, phase, road = pixel_parameters(spec, seed, config)
    t = np.arange(spec.frames_per_day, dtype=np.float64)
    # (T, H, W): sinusoid per pixel, frames equally spaced over one day
    wave = 0.5 + 0.45 * np.sin(
        2.0 * np.pi * t[:, None, None] / spec.frames_per_day + phase[None, :, :])
    signal = amplitude[None, :, :, :] * wave[:, :, :, None] * day_factor(date, config, holidays)
    if config.noise > 0:
        noise_rng = np.random.default_rng(
            np.random.SeedSequence([seed, _city_key(spec.city_id), date.toordinal(), 0x901]))
        signal = signal + noise_rng.normal(0.0, config.noise, size=signal.shape)
    values = quantize_from_unit(signal)
    values[:, ~road, :] = 0
    return DayTensor(spec=spec, date=date, values=values)


def generate_synthetic_static(spec: CityGridSpec, seed: int,
                              config: SyntheticConfig = SyntheticConfig()) -> StaticTensor:
    """Road-aligned static layers: channel 0 is the road mask, the rest are seeded POI maps."""
    _, _, road = pixel_parameters(spec, seed, config)
    rng = np.random.default_rng(np.random.SeedSequence([seed, _city_key(spec.city_id), 0x57A7]))
    values = np.zeros(spec.static_shape, dtype=np.uint8)
    values[0] = road.astype(np.uint8) * 255
    for c in range(1, spec.static_channels):
        density = rng.uniform(0.02, 0.2)
        poi = (rng.random((spec.height, spec.width)) < density) * rng.integers(64, 256)
        values[c] = np.where(road, poi, 0).astype(np.uint8)
    return StaticTensor(spec=spec, values=values)


def synthetic_calendar(city_id: str, start: dt.date, n_days: int, seed: int,
                       config: SyntheticConfig = SyntheticConfig()) -> HolidayCalendar:
    """Deterministic pseudo-holiday calendar covering [start, start + n_days)."""
    rng = np.random.default_rng(np.random.SeedSequence([seed, _city_key(city_id), 0xB01]))
    dates = [start + dt.timedelta(days=i) for i in range(n_days)]
    flags = rng.random(n_days) < config.holiday_fraction
    return HolidayCalendar(
        city_id=city_id,
        holidays=frozenset(d for d, f in zip(dates, flags) if f),
        coverage_start=start,
        coverage_end=dates[-1],
        source=f"synthetic(seed={seed})",
    )


def build_synthetic_city(spec: CityGridSpec, start: dt.date, n_days: int, seed: int,
                         config: SyntheticConfig = SyntheticConfig()):
    """Generate a full city in memory: (day store, holiday calendar)."""
    from .datasets import InMemoryDayStore

    calendar = synthetic_calendar(spec.city_id, start, n_days, seed, config)
    days = {}
    for i in range(n_days):
        date = start + dt.timedelta(days=i)
        days[date] = generate_synthetic_day(spec, date, seed, config, calendar.holidays)
    static = generate_synthetic_static(spec, seed, config)
    return InMemoryDayStore(spec=spec, days=days, static=static), calendar
