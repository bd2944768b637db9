"""Trading calendar: ordered trading days and derived month-end schedule.

The calendar is the join spine for the whole pipeline. Month-ends are the
last trading day of each calendar month present in the input; months with
no trading days simply do not appear, and downstream joins treat the gap
as missing rather than interpolating.
"""
from __future__ import annotations

import logging
from dataclasses import dataclass, field

import numpy as np
import pandas as pd

from .errors import CalendarError

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class TradingCalendar:
    """Immutable ordered trading-day list with month-end extraction."""

    days: pd.DatetimeIndex
    month_ends: pd.DatetimeIndex = field(init=False)

    def __post_init__(self):
        days = pd.DatetimeIndex(self.days)
        if len(days) == 0:
            raise CalendarError("cannot build a calendar from zero trading days")
        if not days.is_monotonic_increasing or days.has_duplicates:
            raise CalendarError("trading days must be strictly increasing and unique")
        object.__setattr__(self, "days", days)
        me = days.to_series().groupby(days.to_period("M")).max()
        object.__setattr__(self, "month_ends", pd.DatetimeIndex(me.values))

    def __len__(self) -> int:
        return len(self.days)

    def next_trading_day_after(self, date) -> pd.Timestamp | None:
        """First trading day strictly after `date`, or None past the end."""
        pos = self.days.searchsorted(pd.Timestamp(date), side="right")
        if pos >= len(self.days):
            return None
        return self.days[pos]

    def month_end_on_or_after(self, date) -> pd.Timestamp | None:
        pos = self.month_ends.searchsorted(pd.Timestamp(date), side="left")
        if pos >= len(self.month_ends):
            return None
        return self.month_ends[pos]

    def month_end_index(self, date) -> int:
        """Position of `date` in month_ends; -1 if not a month-end."""
        pos = self.month_ends.searchsorted(pd.Timestamp(date), side="left")
        if pos < len(self.month_ends) and self.month_ends[pos] == pd.Timestamp(date):
            return int(pos)
        return -1


def build_trading_calendar(daily_dates) -> TradingCalendar:
    """Build a TradingCalendar from an ordered list of trading days.

    Input must be non-empty; duplicates are rejected rather than dropped so
    that upstream data problems surface instead of being papered over.
    """
    dates = pd.DatetimeIndex(pd.to_datetime(np.asarray(daily_dates)))
    if len(dates) == 0:
        raise CalendarError("empty trading-day input")
    return TradingCalendar(days=dates)
