import pandas as pd
import pytest

from cashfactor.errors import CalendarError
from cashfactor.trading_calendar import build_trading_calendar


def test_month_ends_are_max_day_per_month():
    cal = build_trading_calendar(["2020-01-30", "2020-01-31", "2020-02-27", "2020-02-28"])
    assert list(cal.month_ends) == [pd.Timestamp("2020-01-31"), pd.Timestamp("2020-02-28")]


def test_single_day_calendar():
    cal = build_trading_calendar(["2020-03-16"])
    assert list(cal.month_ends) == [pd.Timestamp("2020-03-16")]


def test_gap_month_absent_from_month_ends():
    # middle month has no trading days; it must simply not appear
    cal = build_trading_calendar(["2020-01-15", "2020-01-31", "2020-03-02", "2020-03-31"])
    assert len(cal.month_ends) == 2
    assert list(cal.month_ends) == [pd.Timestamp("2020-01-31"), pd.Timestamp("2020-03-31")]


def test_empty_input_rejected():
    with pytest.raises(CalendarError):
        build_trading_calendar([])


def test_unsorted_and_duplicate_days_rejected():
    with pytest.raises(CalendarError):
        build_trading_calendar(["2020-01-31", "2020-01-02"])
    with pytest.raises(CalendarError):
        build_trading_calendar(["2020-01-02", "2020-01-02"])


def test_every_month_end_is_a_trading_day():
    days = pd.bdate_range("2021-01-01", "2021-06-30")
    cal = build_trading_calendar(days)
    assert all(me in set(cal.days) for me in cal.month_ends)
    # consecutive month-ends differ by exactly one calendar month
    periods = cal.month_ends.to_period("M")
    assert all((periods[i + 1] - periods[i]).n == 1 for i in range(len(periods) - 1))


def test_next_trading_day_and_month_end_lookups():
    cal = build_trading_calendar(["2020-01-02", "2020-01-15", "2020-01-31", "2020-02-14"])
    assert cal.next_trading_day_after("2020-01-15") == pd.Timestamp("2020-01-31")
    assert cal.next_trading_day_after("2020-01-16") == pd.Timestamp("2020-01-31")
    assert cal.next_trading_day_after("2020-02-14") is None
    assert cal.month_end_on_or_after("2020-01-16") == pd.Timestamp("2020-01-31")
    assert cal.month_end_index("2020-01-31") == 0
    assert cal.month_end_index("2020-01-15") == -1
