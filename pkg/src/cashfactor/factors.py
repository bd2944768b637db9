"""Daily factor file handling: monthly compounding and canonical names."""
from __future__ import annotations

import numpy as np
import pandas as pd

from .errors import DataError
from .trading_calendar import TradingCalendar

FACTOR_RENAMES = {
    "mktrf": "market_factor",
    "smb": "size_factor",
    "hml": "value_factor",
    "umd": "momentum_factor",
}
FACTOR_COLUMNS = list(FACTOR_RENAMES.values())


def compound_monthly(daily: pd.DataFrame, calendar: TradingCalendar) -> pd.DataFrame:
    """Compound daily decimal returns within each month, per column.

    `daily` is indexed by date. Output is indexed by month-end trading day;
    the window convention matches the equity return compounding
    ((previous month-end, month-end]).
    """
    df = daily[daily.index.isin(calendar.days)].sort_index()
    if df.empty:
        raise DataError("no factor rows fall on the trading calendar")
    if (df <= -1.0).any().any():
        raise DataError("factor file contains daily returns at or below -100%")
    pos = calendar.month_ends.searchsorted(df.index.to_numpy(), side="left")
    pos = np.minimum(pos, len(calendar.month_ends) - 1)
    grouped = np.log1p(df).groupby(calendar.month_ends[pos]).sum()
    out = np.expm1(grouped)
    out.index.name = "month_end"
    return out


def monthly_factors(daily_factors: pd.DataFrame, calendar: TradingCalendar) -> pd.DataFrame:
    """Monthly factor frame with canonical column names plus rf."""
    monthly = compound_monthly(daily_factors, calendar)
    return monthly.rename(columns=FACTOR_RENAMES)


def monthly_risk_free(daily_factors: pd.DataFrame, calendar: TradingCalendar) -> pd.Series:
    """Monthly compounded risk-free rate, indexed by month_end."""
    if "rf" not in daily_factors.columns:
        raise DataError("factor file lacks an 'rf' column")
    return compound_monthly(daily_factors[["rf"]], calendar)["rf"]


def market_benchmark(daily_factors: pd.DataFrame, calendar: TradingCalendar) -> pd.Series:
    """Total market return benchmark: daily mktrf + rf, compounded monthly."""
    total = (daily_factors["mktrf"] + daily_factors["rf"]).to_frame("market")
    return compound_monthly(total, calendar)["market"]
