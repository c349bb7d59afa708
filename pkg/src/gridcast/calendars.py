"""Temporal encodings and holiday calendars.

Frame indices within a day are encoded as a point on the unit circle; dates
carry a Monday=0 one-hot weekday vector and a holiday flag looked up in a
:class:`HolidayCalendar`. Calendars are plain JSON files; a pluggable provider
interface exists for fetching them, with a file-based provider as the only
shipped implementation.
"""

from __future__ import annotations

import datetime as dt
import json
import math
from dataclasses import dataclass
from importlib import resources
from pathlib import Path
from typing import Iterable, Protocol

import numpy as np

from .errors import CoverageError, DomainError, ParseError, ProviderError

# (cos, sin) at quarter turns; computed exactly rather than through math.cos,
# which returns 6.1e-17 instead of 0 at pi/2.
_QUARTER_POINTS = {0: (1.0, 0.0), 1: (0.0, 1.0), 2: (-1.0, 0.0), 3: (0.0, -1.0)}


@dataclass(frozen=True)
class TimeOfDayEncoding:
    cos_component: float
    sin_component: float


def encode_time(t: int, frames_per_day: int = 288) -> TimeOfDayEncoding:
    """Project frame index ``t`` of ``frames_per_day`` onto the unit circle."""
    if not 0 <= t < frames_per_day:
        raise DomainError(f"frame index {t} outside [0, {frames_per_day})")
    turns = t / frames_per_day
    quarters = 4.0 * turns
    if quarters == int(quarters):
        cos_c, sin_c = _QUARTER_POINTS[int(quarters) % 4]
    else:
        theta = 2.0 * math.pi * turns
        cos_c, sin_c = math.cos(theta), math.sin(theta)
    return TimeOfDayEncoding(cos_component=cos_c, sin_component=sin_c)


def weekday_onehot(date: dt.date) -> np.ndarray:
    """One-hot weekday vector, Monday=0 through Sunday=6."""
    out = np.zeros(7, dtype=np.float64)
    out[date.weekday()] = 1.0
    return out


@dataclass(frozen=True)
class HolidayCalendar:
    city_id: str
    holidays: frozenset
    coverage_start: dt.date
    coverage_end: dt.date
    source: str = ""

    def __post_init__(self):
        if self.coverage_start > self.coverage_end:
            raise ParseError(
                f"coverage_start {self.coverage_start} after coverage_end {self.coverage_end}")
        for d in self.holidays:
            if not self.coverage_start <= d <= self.coverage_end:
                raise ParseError(f"holiday {d} outside declared coverage")

    def covers(self, date: dt.date) -> bool:
        return self.coverage_start <= date <= self.coverage_end


def is_holiday(calendar: HolidayCalendar, date: dt.date) -> bool:
    """Set membership in the calendar; never silently false outside coverage."""
    if not calendar.covers(date):
        raise CoverageError(
            f"{date} outside calendar coverage "
            f"[{calendar.coverage_start}, {calendar.coverage_end}] for {calendar.city_id}")
    return date in calendar.holidays


def validate_coverage(calendar: HolidayCalendar, dates: Iterable[dt.date]) -> None:
    for d in dates:
        if not calendar.covers(d):
            raise CoverageError(
                f"calendar for {calendar.city_id} does not cover {d} "
                f"(coverage [{calendar.coverage_start}, {calendar.coverage_end}])")


def _parse_date(text, path) -> dt.date:
    try:
        return dt.date.fromisoformat(text)
    except (TypeError, ValueError) as exc:
        raise ParseError(f"{path}: bad date {text!r}") from exc


def parse_calendar(doc: dict, origin="<memory>") -> HolidayCalendar:
    if not isinstance(doc, dict):
        raise ParseError(f"{origin}: calendar document must be a JSON object")
    for key in ("city", "coverage_start", "coverage_end", "holidays"):
        if key not in doc:
            raise ParseError(f"{origin}: missing field {key!r}")
    dates = [_parse_date(h, origin) for h in doc["holidays"]]
    if len(set(dates)) != len(dates):
        dupes = sorted({d for d in dates if dates.count(d) > 1})
        raise ParseError(f"{origin}: duplicate holiday dates {dupes}")
    return HolidayCalendar(
        city_id=doc["city"],
        holidays=frozenset(dates),
        coverage_start=_parse_date(doc["coverage_start"], origin),
        coverage_end=_parse_date(doc["coverage_end"], origin),
        source=doc.get("source", str(origin)),
    )


def load_calendar(path) -> HolidayCalendar:
    try:
        doc = json.loads(Path(path).read_text("utf-8"))
    except json.JSONDecodeError as exc:
        raise ParseError(f"{path}: not valid JSON: {exc}") from exc
    return parse_calendar(doc, origin=path)


def store_calendar(calendar: HolidayCalendar, path) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    doc = {
        "city": calendar.city_id,
        "coverage_start": calendar.coverage_start.isoformat(),
        "coverage_end": calendar.coverage_end.isoformat(),
        "holidays": sorted(d.isoformat() for d in calendar.holidays),
        "source": calendar.source,
    }
    path.write_text(json.dumps(doc, indent=2) + "\n", "utf-8")
    return path


class CalendarProvider(Protocol):
    """Anything that can produce a calendar document for (city, year)."""

    def fetch(self, city: str, year: int) -> dict: ...


class FileCalendarProvider:
    """Serves calendar documents from ``<root>/<city>_<year>.json``."""

    def __init__(self, root):
        self.root = Path(root)

    def fetch(self, city: str, year: int) -> dict:
        path = self.root / f"{city}_{year}.json"
        if not path.exists():
            raise ProviderError(f"no calendar file for ({city}, {year}) under {self.root}")
        try:
            return json.loads(path.read_text("utf-8"))
        except json.JSONDecodeError as exc:
            raise ProviderError(f"{path}: not valid JSON: {exc}") from exc


def fetch_calendar(provider: CalendarProvider, city: str, year: int, out_path) -> HolidayCalendar:
    """Fetch a calendar document, persist it, then load it from disk."""
    doc = provider.fetch(city, year)
    out_path = Path(out_path)
    out_path.parent.mkdir(parents=True, exist_ok=True)
    out_path.write_text(json.dumps(doc, indent=2) + "\n", "utf-8")
    return load_calendar(out_path)


def builtin_calendar(city: str) -> HolidayCalendar:
    """Load one of the calendars shipped with the package (berlin, istanbul, moscow)."""
    ref = resources.files("gridcast").joinpath(f"data/calendars/{city.lower()}.json")
    if not ref.is_file():
        raise ProviderError(f"no shipped calendar named {city!r}")
    return parse_calendar(json.loads(ref.read_text("utf-8")), origin=f"builtin:{city.lower()}")
