import datetime as dt

import numpy as np
import pytest

from gridcast import CityGridSpec, DayTensor
from gridcast.calendars import encode_time, weekday_onehot
from gridcast.datasets import InMemoryDayStore, drop_channel_group
from gridcast.errors import ConfigError, DomainError, ShapeError
from gridcast.features import (ChannelManifest, DaySet, ManifestEntry,
                               assemble_input, daily_stats_full,
                               daily_stats_sampled, periodic_day_set,
                               periodic_feature)
from gridcast.grids import slice_window

from conftest import constant_day, random_day, random_static

SPEC288 = CityGridSpec("statstown", height=4, width=4, frames_per_day=288)


def naive_daily_stats(day: DayTensor) -> np.ndarray:
    """Independent per-pixel loop over every frame."""
    spec = day.spec
    out = np.zeros((spec.dynamic_channels + 1, spec.height, spec.width))
    for h in range(spec.height):
        for w in range(spec.width):
            for c in range(spec.dynamic_channels):
                total = 0
                for t in range(spec.frames_per_day):
                    total += int(day.values[t, h, w, c])
                out[c, h, w] = total / (255 * spec.frames_per_day)
            seen = 0
            for t in range(spec.frames_per_day):
                if any(day.values[t, h, w, c] != 0 for c in range(spec.dynamic_channels)):
                    seen += 1
            out[spec.dynamic_channels, h, w] = seen / spec.frames_per_day
    return out


class TestDaySet:
    def test_default_offsets(self):
        assert DaySet().offsets == (-7, -3, -2, -1, 1, 2, 3, 7)

    def test_rejects_zero_and_duplicates(self):
        with pytest.raises(ConfigError):
            DaySet((-1, 0, 1))
        with pytest.raises(ConfigError):
            DaySet((-1, 1, 1))

    def test_day_set_matches_brute_force_formula(self):
        date = dt.date(2019, 6, 15)
        result = periodic_day_set(date)
        oracle = ({date - dt.timedelta(days=7)}
                  | {date - dt.timedelta(days=k) for k in (1, 2, 3)}
                  | {date + dt.timedelta(days=k) for k in (1, 2, 3)}
                  | {date + dt.timedelta(days=7)})
        assert set(result) == oracle
        assert len(result) == 8
        assert date not in result

    def test_symmetric_offset_magnitudes(self):
        mags = sorted(abs(o) for o in DaySet().offsets)
        assert mags == [1, 1, 2, 2, 3, 3, 7, 7]

    def test_order_follows_offsets(self):
        date = dt.date(2019, 6, 15)
        expected = [date + dt.timedelta(days=o) for o in DaySet().offsets]
        assert periodic_day_set(date) == expected


class TestDailyStatsFull:
    def test_all_zero_day(self, tiny_spec):
        stats = daily_stats_full(constant_day(tiny_spec, 0))
        assert stats.values.shape == (10, 4, 4)
        assert np.all(stats.values == 0.0)

    def test_constant_max_day(self, tiny_spec):
        stats = daily_stats_full(constant_day(tiny_spec, 255))
        assert np.all(stats.values == 1.0)

    def test_matches_naive_loop_exactly(self):
        day = random_day(SPEC288, seed=11)
        stats = daily_stats_full(day)
        oracle = naive_daily_stats(day)
        assert np.array_equal(stats.values, oracle)

    def test_mode_recorded(self, tiny_spec):
        assert daily_stats_full(constant_day(tiny_spec, 1)).mode == "full_day"


class TestDailyStatsSampled:
    def test_constant_day_equals_full(self):
        day = constant_day(SPEC288, 100)
        full = daily_stats_full(day)
        sampled = daily_stats_sampled(day, np.random.default_rng(0))
        assert np.array_equal(sampled.values, full.values)

    def test_k_and_starts_in_range(self):
        day = random_day(SPEC288, seed=2)
        for seed in range(50):
            stats = daily_stats_sampled(day, np.random.default_rng(seed))
            assert stats.mode == "sampled"
            assert 1 <= stats.sample_k <= 4
            assert len(stats.sample_starts) == stats.sample_k
            assert all(0 <= s <= 288 - 12 for s in stats.sample_starts)

    def test_deterministic_given_seed(self):
        day = random_day(SPEC288, seed=2)
        a = daily_stats_sampled(day, np.random.default_rng(77))
        b = daily_stats_sampled(day, np.random.default_rng(77))
        assert np.array_equal(a.values, b.values)
        assert a.sample_starts == b.sample_starts

    def test_short_day_rejected(self, tiny_spec):
        with pytest.raises(DomainError):
            daily_stats_sampled(constant_day(tiny_spec, 1), np.random.default_rng(0))

    def test_unbiased_estimate_quick(self):
        # Smaller version of the acceptance Monte-Carlo check
        day = random_day(SPEC288, seed=1234)
        full = daily_stats_full(day).values
        acc = np.zeros_like(full)
        n = 2000
        for seed in range(n):
            acc += daily_stats_sampled(day, np.random.default_rng(seed)).values
        assert np.abs(acc / n - full).max() < 0.02


def make_store(values_by_offset: dict, base: dt.date):
    """Store whose day for base+offset is a constant tensor of the given value."""
    days = {}
    for offset, value in values_by_offset.items():
        date = base + dt.timedelta(days=offset)
        days[date] = constant_day(SPEC288, value, date=date)
    return InMemoryDayStore(spec=SPEC288, days=days, static=random_static(SPEC288))


class TestPeriodicFeature:
    base = dt.date(2019, 6, 15)

    def test_channel_count_and_order(self):
        store = make_store({o: 51 + 10 * i for i, o in enumerate(DaySet().offsets)}, self.base)
        planes = periodic_feature(self.base, store, "test", np.random.default_rng(0))
        assert planes.shape == (80, 4, 4)
        for i, offset in enumerate(DaySet().offsets):
            value = (51 + 10 * i) / 255.0
            block = planes[i * 10:(i + 1) * 10]
            # constant day: every mean stat equals the constant, validity is 1
            np.testing.assert_allclose(block[:9], value, atol=1e-12)
            np.testing.assert_allclose(block[9], 1.0, atol=0)

    def test_all_days_absent_uses_fill(self):
        store = InMemoryDayStore(spec=SPEC288, days={}, static=random_static(SPEC288))
        fill = np.linspace(0.1, 1.0, 10)
        planes = periodic_feature(self.base, store, "train", np.random.default_rng(0),
                                  fill_stats=fill)
        assert planes.shape == (80, 4, 4)
        for i in range(8):
            block = planes[i * 10:(i + 1) * 10]
            np.testing.assert_array_equal(block, np.broadcast_to(fill[:, None, None], (10, 4, 4)))

    def test_absent_without_fill_is_zero(self):
        store = InMemoryDayStore(spec=SPEC288, days={}, static=random_static(SPEC288))
        planes = periodic_feature(self.base, store, "train", np.random.default_rng(0))
        assert np.all(planes == 0.0)

    def test_test_mode_past_days_use_full_stats(self):
        days = {}
        rng_days = {}
        for offset in DaySet().offsets:
            date = self.base + dt.timedelta(days=offset)
            day = random_day(SPEC288, date=date, seed=100 + offset)
            days[date] = day
            rng_days[offset] = day
        store = InMemoryDayStore(spec=SPEC288, days=days, static=random_static(SPEC288))
        planes = periodic_feature(self.base, store, "test", np.random.default_rng(0))
        for i, offset in enumerate(DaySet().offsets):
            block = planes[i * 10:(i + 1) * 10]
            if offset < 0:
                expected = daily_stats_full(rng_days[offset]).values
                assert np.array_equal(block, expected)
            else:
                # future days are estimated; on random data the estimate
                # almost surely differs from the full statistics
                full = daily_stats_full(rng_days[offset]).values
                assert not np.array_equal(block, full)

    def test_train_mode_samples_past_days_too(self):
        days = {}
        for offset in DaySet().offsets:
            date = self.base + dt.timedelta(days=offset)
            days[date] = random_day(SPEC288, date=date, seed=200 + offset)
        store = InMemoryDayStore(spec=SPEC288, days=days, static=random_static(SPEC288))
        planes = periodic_feature(self.base, store, "train", np.random.default_rng(3))
        first_past = days[self.base - dt.timedelta(days=7)]
        assert not np.array_equal(planes[0:10], daily_stats_full(first_past).values)

    def test_bad_mode(self):
        store = make_store({}, self.base)
        with pytest.raises(ConfigError):
            periodic_feature(self.base, store, "predict", np.random.default_rng(0))


def build_full_bundle(order=None, spec=None, seed=5):
    spec = spec or SPEC288
    d1 = random_day(spec, date=dt.date(2019, 6, 14), seed=seed)
    d2 = random_day(spec, date=dt.date(2019, 6, 15), seed=seed + 1)
    window = slice_window([d1, d2], d1.date, t=200, offsets=(1, 2))
    static = random_static(spec, seed=seed)
    periodic = np.random.default_rng(seed).uniform(0, 1, size=(80, spec.height, spec.width))
    time_enc = encode_time(200, spec.frames_per_day)
    weekday = weekday_onehot(d1.date)
    kwargs = {} if order is None else {"order": order}
    bundle = assemble_input(window, static, periodic, time_enc, weekday, True, **kwargs)
    pieces = {"window": window, "static": static, "periodic": periodic,
              "time": time_enc, "weekday": weekday}
    return bundle, pieces


class TestAssembleInput:
    def test_default_totals_207(self):
        bundle, _ = build_full_bundle()
        assert bundle.input.shape == (207, 4, 4)
        assert bundle.manifest.total_channels == 207

    def test_manifest_partitions_range(self):
        bundle, _ = build_full_bundle()
        cursor = 0
        for entry in bundle.manifest.entries:
            assert entry.start == cursor
            cursor = entry.stop
        assert cursor == 207

    def test_group_sizes(self):
        bundle, _ = build_full_bundle()
        m = bundle.manifest
        assert m.range_for("dynamic") == (0, 108)
        assert m.range_for("static") == (108, 117)
        assert m.range_for("periodic[-7]") == (117, 127)
        assert m.range_for("periodic[+7]") == (187, 197)
        assert m.range_for("time") == (197, 199)
        assert m.range_for("weekday") == (199, 206)
        assert m.range_for("holiday") == (206, 207)

    def test_lossless_recovery(self):
        bundle, pieces = build_full_bundle()
        window = pieces["window"]
        dyn = window.input_frames.transpose(0, 3, 1, 2).reshape(108, 4, 4)
        np.testing.assert_array_equal(bundle.planes("dynamic"), dyn)
        np.testing.assert_array_equal(bundle.planes("static"),
                                      (pieces["static"].values / 255.0).astype(np.float32))
        np.testing.assert_array_equal(
            bundle.planes("periodic[-3]"), pieces["periodic"][10:20].astype(np.float32))
        time_planes = bundle.planes("time")
        assert np.all(time_planes[0] == np.float32(pieces["time"].cos_component))
        assert np.all(time_planes[1] == np.float32(pieces["time"].sin_component))
        weekday_planes = bundle.planes("weekday")
        np.testing.assert_array_equal(weekday_planes[:, 0, 0], pieces["weekday"])
        assert np.all(bundle.planes("holiday") == 1.0)

    def test_dynamic_plane_layout(self):
        # oldest frame first, channel-major within each frame
        bundle, pieces = build_full_bundle()
        window = pieces["window"]
        dyn = bundle.planes("dynamic")
        for f in (0, 3, 11):
            for c in (0, 4, 8):
                np.testing.assert_array_equal(dyn[f * 9 + c], window.input_frames[f, :, :, c])

    def test_permuted_order_consistent_with_manifest(self):
        order = ("holiday", "time", "dynamic", "periodic", "weekday", "static")
        permuted, _ = build_full_bundle(order=order)
        default, _ = build_full_bundle()
        assert permuted.manifest.total_channels == 207
        assert permuted.manifest.entries[0].tag == "holiday"
        for tag in default.manifest.tags:
            np.testing.assert_array_equal(permuted.planes(tag), default.planes(tag))

    def test_optional_groups_dropped(self):
        spec = SPEC288
        d1 = random_day(spec, date=dt.date(2019, 6, 14), seed=1)
        d2 = random_day(spec, date=dt.date(2019, 6, 15), seed=2)
        window = slice_window([d1, d2], d1.date, t=200, offsets=(1,))
        bundle = assemble_input(window, None, None, None, None, None)
        assert bundle.manifest.total_channels == 108
        assert bundle.manifest.tags == ("dynamic",)

    def test_value_ranges(self):
        bundle, _ = build_full_bundle()
        time_lo, time_hi = bundle.manifest.range_for("time")
        mask = np.ones(207, dtype=bool)
        mask[time_lo:time_hi] = False
        assert bundle.input[mask].min() >= 0.0 and bundle.input[mask].max() <= 1.0
        assert bundle.input[time_lo:time_hi].min() >= -1.0
        assert bundle.input[time_lo:time_hi].max() <= 1.0

    def test_shape_mismatch_rejected(self):
        bundle, pieces = build_full_bundle()
        window = pieces["window"]
        bad_static = random_static(CityGridSpec("other", height=8, width=8,
                                                frames_per_day=288))
        with pytest.raises(ShapeError):
            assemble_input(window, bad_static, None, None, None, None)

    def test_unknown_order_group(self):
        bundle, pieces = build_full_bundle()
        with pytest.raises(ConfigError):
            assemble_input(pieces["window"], None, None, None, None, None,
                           order=("dynamic", "nonsense"))


class TestChannelManifest:
    def test_contiguity_enforced(self):
        with pytest.raises(ShapeError):
            ChannelManifest((ManifestEntry("a", 0, 3), ManifestEntry("b", 4, 6)))

    def test_duplicate_tags_rejected(self):
        with pytest.raises(ShapeError):
            ChannelManifest((ManifestEntry("a", 0, 3), ManifestEntry("a", 3, 6)))

    def test_json_round_trip(self):
        manifest = ChannelManifest((ManifestEntry("a", 0, 3), ManifestEntry("b", 3, 6)))
        again = ChannelManifest.from_json(manifest.to_json())
        assert again == manifest

    def test_unknown_tag(self):
        manifest = ChannelManifest((ManifestEntry("a", 0, 3),))
        with pytest.raises(KeyError):
            manifest.range_for("b")


class TestDropChannelGroup:
    def test_drop_periodic(self):
        from gridcast.datasets import Dataset
        bundle, _ = build_full_bundle()
        ds = Dataset(inputs=bundle.input[None], targets=np.zeros((1, 18, 4, 4), np.float32),
                     anchors=[None], manifest=bundle.manifest, offsets=(1, 2))
        out = drop_channel_group(ds, "periodic")
        assert out.manifest.total_channels == 127
        assert "periodic[-7]" not in out.manifest.tags
        np.testing.assert_array_equal(out.inputs[0][:108], bundle.input[:108])
        start, stop = out.manifest.range_for("time")
        np.testing.assert_array_equal(out.inputs[0][start:stop], bundle.planes("time"))

    def test_drop_missing_group(self):
        from gridcast.datasets import Dataset
        bundle, _ = build_full_bundle()
        ds = Dataset(inputs=bundle.input[None], targets=np.zeros((1, 18, 4, 4), np.float32),
                     anchors=[None], manifest=bundle.manifest, offsets=(1, 2))
        once = drop_channel_group(ds, "holiday")
        with pytest.raises(ConfigError):
            drop_channel_group(once, "holiday")
