import datetime as dt
import json
import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from gridcast.calendars import (FileCalendarProvider, HolidayCalendar,
                                builtin_calendar, encode_time, fetch_calendar,
                                is_holiday, load_calendar, store_calendar,
                                weekday_onehot)
from gridcast.errors import CoverageError, DomainError, ParseError, ProviderError


class TestEncodeTime:
    def test_axis_points_exact(self):
        assert (encode_time(0).cos_component, encode_time(0).sin_component) == (1.0, 0.0)
        assert (encode_time(72).cos_component, encode_time(72).sin_component) == (0.0, 1.0)
        assert (encode_time(144).cos_component, encode_time(144).sin_component) == (-1.0, 0.0)
        assert (encode_time(216).cos_component, encode_time(216).sin_component) == (0.0, -1.0)

    def test_unit_circle_all_indices(self):
        for t in range(288):
            e = encode_time(t)
            assert abs(e.cos_component ** 2 + e.sin_component ** 2 - 1.0) <= 1e-9

    def test_derived_quarter_value(self):
        # theta = 2*pi*36/288 = pi/4
        e = encode_time(36)
        assert e.cos_component == pytest.approx(math.sqrt(0.5), abs=1e-12)
        assert e.sin_component == pytest.approx(math.sqrt(0.5), abs=1e-12)

    def test_injective(self):
        points = {(encode_time(t).cos_component, encode_time(t).sin_component)
                  for t in range(288)}
        assert len(points) == 288

    def test_other_frame_counts(self):
        e = encode_time(3, frames_per_day=12)
        assert (e.cos_component, e.sin_component) == (0.0, 1.0)

    def test_domain_error(self):
        with pytest.raises(DomainError):
            encode_time(288)
        with pytest.raises(DomainError):
            encode_time(-1)


class TestWeekday:
    def test_known_monday(self):
        # 2019-01-07 was a Monday (civil calendar)
        np.testing.assert_array_equal(weekday_onehot(dt.date(2019, 1, 7)),
                                      [1, 0, 0, 0, 0, 0, 0])

    def test_known_sunday(self):
        # 2019-01-13 was a Sunday
        np.testing.assert_array_equal(weekday_onehot(dt.date(2019, 1, 13)),
                                      [0, 0, 0, 0, 0, 0, 1])

    @given(st.integers(min_value=700000, max_value=800000))
    def test_onehot_property(self, ordinal):
        vec = weekday_onehot(dt.date.fromordinal(ordinal))
        assert vec.sum() == 1.0
        assert set(np.unique(vec)) <= {0.0, 1.0}

    @given(st.integers(min_value=700000, max_value=800000))
    def test_weekly_periodicity(self, ordinal):
        date = dt.date.fromordinal(ordinal)
        np.testing.assert_array_equal(weekday_onehot(date),
                                      weekday_onehot(date + dt.timedelta(days=7)))


@pytest.fixture
def fixture_calendar():
    return builtin_calendar("berlin")


class TestHolidayLookup:
    def test_listed_date_is_holiday(self, fixture_calendar):
        assert is_holiday(fixture_calendar, dt.date(2019, 10, 3)) is True

    def test_adjacent_date_is_not(self, fixture_calendar):
        assert is_holiday(fixture_calendar, dt.date(2019, 10, 4)) is False

    def test_outside_coverage_raises(self, fixture_calendar):
        with pytest.raises(CoverageError):
            is_holiday(fixture_calendar, dt.date(2018, 12, 31))
        with pytest.raises(CoverageError):
            is_holiday(fixture_calendar, dt.date(2020, 1, 1))

    def test_all_builtin_cities_load(self):
        for city in ("berlin", "istanbul", "moscow"):
            cal = builtin_calendar(city)
            assert cal.coverage_start == dt.date(2019, 1, 1)
            assert cal.coverage_end == dt.date(2019, 12, 31)
            assert len(cal.holidays) >= 10

    def test_unknown_builtin(self):
        with pytest.raises(ProviderError):
            builtin_calendar("atlantis")


class TestCalendarFiles:
    def test_round_trip(self, fixture_calendar, tmp_path):
        path = store_calendar(fixture_calendar, tmp_path / "cal.json")
        loaded = load_calendar(path)
        assert loaded.holidays == fixture_calendar.holidays
        assert loaded.coverage_start == fixture_calendar.coverage_start
        assert loaded.coverage_end == fixture_calendar.coverage_end

    def test_duplicate_date_is_parse_error(self, tmp_path):
        doc = {"city": "x", "coverage_start": "2019-01-01", "coverage_end": "2019-12-31",
               "holidays": ["2019-05-01", "2019-05-01"]}
        path = tmp_path / "dup.json"
        path.write_text(json.dumps(doc))
        with pytest.raises(ParseError):
            load_calendar(path)

    def test_empty_holiday_list_valid(self, tmp_path):
        doc = {"city": "x", "coverage_start": "2019-01-01", "coverage_end": "2019-12-31",
               "holidays": []}
        path = tmp_path / "empty.json"
        path.write_text(json.dumps(doc))
        cal = load_calendar(path)
        assert is_holiday(cal, dt.date(2019, 6, 1)) is False

    def test_holiday_outside_coverage_is_parse_error(self, tmp_path):
        doc = {"city": "x", "coverage_start": "2019-01-01", "coverage_end": "2019-01-31",
               "holidays": ["2019-05-01"]}
        path = tmp_path / "bad.json"
        path.write_text(json.dumps(doc))
        with pytest.raises(ParseError):
            load_calendar(path)

    def test_not_json_is_parse_error(self, tmp_path):
        path = tmp_path / "garbage.json"
        path.write_text("{{{")
        with pytest.raises(ParseError):
            load_calendar(path)

    def test_missing_field_is_parse_error(self, tmp_path):
        path = tmp_path / "short.json"
        path.write_text(json.dumps({"city": "x", "holidays": []}))
        with pytest.raises(ParseError):
            load_calendar(path)


class TestProvider:
    def test_fetch_writes_then_loads(self, fixture_calendar, tmp_path):
        src = tmp_path / "remote"
        store_calendar(fixture_calendar, src / "berlin_2019.json")
        provider = FileCalendarProvider(src)
        out = tmp_path / "local" / "berlin.json"
        cal = fetch_calendar(provider, "berlin", 2019, out)
        assert out.exists()
        assert cal.holidays == fixture_calendar.holidays
        # the written file is itself loadable, same format
        assert load_calendar(out).holidays == cal.holidays

    def test_missing_provider_file(self, tmp_path):
        provider = FileCalendarProvider(tmp_path)
        with pytest.raises(ProviderError):
            fetch_calendar(provider, "nowhere", 2019, tmp_path / "out.json")
