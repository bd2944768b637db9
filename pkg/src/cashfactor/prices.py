"""Daily price ingestion, corporate-action adjustment, monthly standardization.

Raw daily bars carry a raw price plus cumulative adjustment factors for
price and share count. Adjusted price is raw price divided by the price
factor, adjusted shares are raw shares times the share factor, and market
cap is their product, which makes it invariant under splits.

Monthly rows are sampled at the calendar's month-end trading day. Monthly
returns prefer compounded daily returns (they capture dividends) and fall
back to the percentage change of the adjusted month-end price. Prices are
never forward-filled: a security without a month-end price is excluded
that month, because a stale price would corrupt the return it feeds.
"""
from __future__ import annotations

import logging

import numpy as np
import pandas as pd

from .errors import DataError
from .trading_calendar import TradingCalendar

logger = logging.getLogger(__name__)

#: columns of an adjusted daily bar frame
ADJUSTED_COLUMNS = ["security_id", "date", "adj_price", "adj_shares", "market_cap", "daily_return"]


def dedupe_bars(bars: pd.DataFrame) -> pd.DataFrame:
    """Resolve duplicate (security_id, date) rows, last write wins."""
    dup = bars.duplicated(subset=["security_id", "date"], keep="last")
    if dup.any():
        logger.warning("dropping %d duplicate (security, date) rows (last write wins)", int(dup.sum()))
        bars = bars[~dup]
    return bars


def adjust_prices(bars: pd.DataFrame) -> pd.DataFrame:
    """Apply corporate-action adjustments to a daily bar frame.

    Parameters
    ----------
    bars : DataFrame
        Columns: security_id, date, raw_price, cfacpr, cfacshr,
        shares_outstanding, daily_return. raw_price/daily_return may be NaN.

    Returns
    -------
    DataFrame with ADJUSTED_COLUMNS, sorted by (security_id, date). Rows
    whose adjustment factors are missing or nonpositive are rejected with
    a logged diagnostic. Rows may carry a return without a price.
    """
    bars = dedupe_bars(bars.copy())
    has_price = bars["raw_price"].notna()
    bad_factor = has_price & ~((bars["cfacpr"] > 0) & (bars["cfacshr"] > 0))
    if bad_factor.any():
        logger.warning("rejecting %d daily rows with nonpositive or missing adjustment factors",
                       int(bad_factor.sum()))
        bars = bars[~bad_factor]

    out = pd.DataFrame({
        "security_id": bars["security_id"],
        "date": bars["date"],
        "adj_price": bars["raw_price"] / bars["cfacpr"],
        "adj_shares": bars["shares_outstanding"] * bars["cfacshr"],
        "daily_return": bars["daily_return"],
    })
    out["market_cap"] = out["adj_price"] * out["adj_shares"]
    out = out[ADJUSTED_COLUMNS].sort_values(["security_id", "date"], kind="stable")
    return out.reset_index(drop=True)


def _month_end_of(dates: pd.Series, calendar: TradingCalendar) -> pd.Series:
    """Map each trading day to its month-end trading day."""
    pos = calendar.month_ends.searchsorted(dates.to_numpy(), side="left")
    pos = np.minimum(pos, len(calendar.month_ends) - 1)
    return pd.Series(calendar.month_ends[pos], index=dates.index)


def compound_monthly_returns(daily: pd.DataFrame, calendar: TradingCalendar) -> pd.DataFrame:
    """Compound daily returns into monthly returns per security.

    The compounding window for month m is (previous month-end, m]. Months
    with no return observations are absent from the output, never zero.
    Returns at or below -100% are rejected with a diagnostic; dates off the
    trading calendar likewise.

    Returns a frame with columns security_id, month_end, monthly_return.
    """
    df = daily.loc[daily["daily_return"].notna(), ["security_id", "date", "daily_return"]].copy()
    if df.empty:
        return pd.DataFrame(columns=["security_id", "month_end", "monthly_return"])

    on_calendar = df["date"].isin(calendar.days)
    if not on_calendar.all():
        logger.warning("rejecting %d daily returns dated off the trading calendar",
                       int((~on_calendar).sum()))
        df = df[on_calendar]

    wiped = df["daily_return"] <= -1.0
    if wiped.any():
        logger.warning("rejecting %d daily returns at or below -100%%", int(wiped.sum()))
        df = df[~wiped]
    if df.empty:
        return pd.DataFrame(columns=["security_id", "month_end", "monthly_return"])

    df["month_end"] = _month_end_of(df["date"], calendar)
    df = df.sort_values(["security_id", "date"], kind="stable")
    df["_log1p"] = np.log1p(df["daily_return"].to_numpy())
    summed = df.groupby(["security_id", "month_end"], sort=True)["_log1p"].sum()
    out = np.expm1(summed).rename("monthly_return").reset_index()
    return out


def sample_month_end(adjusted: pd.DataFrame, calendar: TradingCalendar) -> pd.DataFrame:
    """Sample adjusted daily series at month-end trading days.

    One row per (security, month_end) where an adjusted price exists on
    exactly that day. monthly_return comes from compounded daily returns
    when the security has any that month, else from the percentage change
    of adj_price between consecutive month-ends.

    Returns a frame with columns security_id, month_end, adj_price,
    market_cap, monthly_return, sorted by (security_id, month_end).
    """
    me_set = calendar.month_ends
    rows = adjusted[adjusted["date"].isin(me_set) & adjusted["adj_price"].notna()].copy()
    rows = rows.rename(columns={"date": "month_end"})
    rows = rows.sort_values(["security_id", "month_end"], kind="stable")

    # price-derived fallback return: change across *consecutive* calendar
    # month-ends only, so a month gap yields missing instead of a stale jump
    me_pos = pd.Series(np.arange(len(me_set)), index=me_set)
    rows["_me_pos"] = rows["month_end"].map(me_pos)
    prev_price = rows.groupby("security_id")["adj_price"].shift(1)
    prev_pos = rows.groupby("security_id")["_me_pos"].shift(1)
    consecutive = (rows["_me_pos"] - prev_pos) == 1
    price_ret = np.where(consecutive & prev_price.notna() & (prev_price > 0),
                         rows["adj_price"] / prev_price - 1.0, np.nan)

    compounded = compound_monthly_returns(adjusted, calendar)
    key = pd.MultiIndex.from_frame(rows[["security_id", "month_end"]])
    comp_map = compounded.set_index(["security_id", "month_end"])["monthly_return"]
    comp_ret = comp_map.reindex(key).to_numpy(dtype=float)

    rows["monthly_return"] = np.where(np.isfinite(comp_ret), comp_ret, price_ret)
    out = rows[["security_id", "month_end", "adj_price", "market_cap", "monthly_return"]]
    return out.reset_index(drop=True)


def monthly_equity_table(bars: pd.DataFrame, calendar: TradingCalendar) -> pd.DataFrame:
    """Convenience: adjust daily bars and sample them to monthly rows."""
    return sample_month_end(adjust_prices(bars), calendar)
