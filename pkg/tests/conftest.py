import datetime as dt

import numpy as np
import pytest

from gridcast import CityGridSpec, DayTensor, StaticTensor


@pytest.fixture
def tiny_spec():
    return CityGridSpec("testville", height=4, width=4, frames_per_day=24)


def random_day(spec: CityGridSpec, date=dt.date(2019, 3, 5), seed=0) -> DayTensor:
    rng = np.random.default_rng(seed)
    values = rng.integers(0, 256, size=spec.day_shape, dtype=np.uint8)
    return DayTensor(spec=spec, date=date, values=values)


def constant_day(spec: CityGridSpec, value: int, date=dt.date(2019, 3, 5)) -> DayTensor:
    values = np.full(spec.day_shape, value, dtype=np.uint8)
    return DayTensor(spec=spec, date=date, values=values)


def random_static(spec: CityGridSpec, seed=0) -> StaticTensor:
    rng = np.random.default_rng(seed)
    values = rng.integers(0, 256, size=spec.static_shape, dtype=np.uint8)
    return StaticTensor(spec=spec, values=values)
