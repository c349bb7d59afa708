"""Desk-scale gridded traffic-movie forecasting toolkit."""

from .calendars import (HolidayCalendar, TimeOfDayEncoding, builtin_calendar,
                        encode_time, fetch_calendar, is_holiday, load_calendar,
                        store_calendar, weekday_onehot)
from .errors import (ConfigError, CoverageError, CorruptionError, DataError,
                     DomainError, FormatError, GridcastError, NumericError,
                     ParseError, ProviderError, ShapeError, WindowOutOfRangeError)
from .features import (ChannelManifest, DailyStats, DaySet, FeatureBundle,
                       assemble_input, daily_stats_full, daily_stats_sampled,
                       periodic_day_set, periodic_feature)
from .grids import (CityGridSpec, DayTensor, SampleWindow, StaticTensor,
                    quantize_from_unit, scale_to_unit, slice_window)
from .scoring import EvalReport, score
from .storage import load_day, load_static, store_day, store_static
from .synthetic import SyntheticConfig, build_synthetic_city, generate_synthetic_day

__version__ = "0.1.0"
