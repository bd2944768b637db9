"""Monthly-rebalanced long-only backtest driven by the lookback-mean signal.

Each formation month-end t: average the winsorized signal over the
trailing L months (full coverage required by default), keep firms whose
average is positive, weight proportionally to the average so weights sum
to one, then accrue each holding's next-month return. The return series
is dated by the month in which it is realized (t+1), so every dated value
depends only on information available by its date.

Months with no positive-signal firm stay uninvested and earn zero (or the
risk-free rate if configured). A held security missing its next-month
return contributes zero without reweighting the survivors; the event is
counted because frequent hits point at survivorship problems upstream.
"""
from __future__ import annotations

import logging
from dataclasses import dataclass, field

import numpy as np
import pandas as pd

from .errors import DataError
from .trading_calendar import TradingCalendar

logger = logging.getLogger(__name__)

WEIGHT_SUM_TOL = 1e-12


@dataclass(frozen=True)
class PortfolioSnapshot:
    """Holdings formed at one month-end: strictly positive weights, sum 1."""

    month_end: pd.Timestamp
    holdings: dict
    lookback_used: int

    def __post_init__(self):
        if self.holdings:
            w = np.array(list(self.holdings.values()), dtype=float)
            if not np.all(w > 0.0):
                raise DataError(f"snapshot {self.month_end.date()}: nonpositive weight")
            if abs(w.sum() - 1.0) > WEIGHT_SUM_TOL:
                raise DataError(f"snapshot {self.month_end.date()}: weights sum to {w.sum()!r}")

    @property
    def n_holdings(self) -> int:
        return len(self.holdings)


@dataclass
class BacktestResult:
    """Backtest output: realized monthly returns, cumulative path, snapshots."""

    monthly_returns: pd.Series
    cumulative: pd.Series
    snapshots: list
    config: dict
    missing_return_events: list = field(default_factory=list)

    @property
    def n_months(self) -> int:
        return len(self.monthly_returns)


def _signal_pivot(signals: pd.DataFrame) -> pd.DataFrame:
    """month_end x security_id table of winsorized signal values."""
    df = signals[["month_end", "security_id", "b_winsorized", "firm_id"]].copy()
    dup = df.duplicated(subset=["month_end", "security_id"], keep=False)
    if dup.any():
        logger.warning("signals: %d duplicate (month, security) rows; keeping first by firm_id",
                       int(dup.sum()))
        df = df.sort_values(["month_end", "security_id", "firm_id"], kind="stable")
        df = df.drop_duplicates(subset=["month_end", "security_id"], keep="first")
    pivot = df.pivot(index="month_end", columns="security_id", values="b_winsorized")
    return pivot.sort_index().sort_index(axis=1)


def _window_months(calendar: TradingCalendar, t: pd.Timestamp, L: int) -> pd.DatetimeIndex | None:
    pos = calendar.month_end_index(t)
    if pos < 0 or pos - L + 1 < 0:
        return None
    return calendar.month_ends[pos - L + 1: pos + 1]


def lookback_average(signals: pd.DataFrame, L: int, t, calendar: TradingCalendar,
                     min_months: int | None = None) -> pd.Series:
    """Per-firm mean signal over the L months ending at t.

    Firms lacking the coverage requirement (all L months unless
    `min_months` relaxes it) are absent from the result.
    """
    if L < 1:
        raise DataError(f"lookback must be >= 1, got {L}")
    t = pd.Timestamp(t)
    window = _window_months(calendar, t, L)
    if window is None:
        return pd.Series(dtype=float)
    pivot = _signal_pivot(signals[signals["month_end"].isin(window)])
    return _window_mean(pivot, window, L, min_months)


def _window_mean(pivot: pd.DataFrame, window: pd.DatetimeIndex, L: int,
                 min_months: int | None) -> pd.Series:
    need = L if min_months is None else min(min_months, L)
    sub = pivot.reindex(window)
    counts = sub.notna().sum(axis=0)
    means = sub.mean(axis=0)
    out = means[counts >= need].dropna()
    out.index.name = "security_id"
    return out


def select_and_weight(avg_signals: pd.Series) -> dict:
    """Positive-signal selection with proportional weights summing to one."""
    positive = avg_signals[avg_signals > 0.0]
    if positive.empty:
        return {}
    total = float(positive.sum())
    return {sec: float(v) / total for sec, v in positive.items()}


def portfolio_return(snapshot: PortfolioSnapshot, next_month_returns: pd.Series) -> tuple[float, list]:
    """Weighted next-month return of a snapshot.

    A held security without a next-month return contributes zero and is
    reported back; remaining weights are NOT renormalized.
    """
    total = 0.0
    missing = []
    for sec, w in snapshot.holdings.items():
        r = next_month_returns.get(sec, np.nan)
        if pd.isna(r):
            missing.append(sec)
            continue
        total += w * float(r)
    if missing:
        logger.warning("month %s: %d held securities missing next-month returns: %s",
                       snapshot.month_end.date(), len(missing), missing)
    return total, missing


def cumulative_returns(monthly: pd.Series) -> pd.Series:
    """Compound a monthly return series: exp(cumsum(log(1+r))) - 1."""
    vals = monthly.to_numpy(dtype=float)
    if np.any(vals <= -1.0):
        raise DataError("cannot compound returns at or below -100%")
    out = np.expm1(np.cumsum(np.log1p(vals)))
    return pd.Series(out, index=monthly.index, name="cumulative_return")


def run_backtest(signals: pd.DataFrame, monthly_equity: pd.DataFrame, L: int,
                 period: tuple, calendar: TradingCalendar,
                 empty_month: str = "zero", risk_free: pd.Series | None = None,
                 min_months: int | None = None) -> BacktestResult:
    """Run the monthly rebalancing strategy over formation months in `period`.

    Parameters
    ----------
    signals : selectable signal rows (month_end, security_id, b_winsorized)
    monthly_equity : month-end rows with monthly_return per security
    L : lookback months for the signal average
    period : (start, end) bounds on formation month-ends, inclusive
    calendar : shared trading calendar
    empty_month : "zero" or "risk_free" return when nothing is selected
    risk_free : monthly rf series, required for empty_month="risk_free"

    The realized return of the snapshot formed at t is dated t+1. The last
    calendar month cannot form a realizable snapshot and is skipped.
    """
    if empty_month not in ("zero", "risk_free"):
        raise DataError(f"unknown empty-month policy '{empty_month}'")
    if empty_month == "risk_free" and risk_free is None:
        raise DataError("empty_month='risk_free' requires a risk-free series")

    start, end = pd.Timestamp(period[0]), pd.Timestamp(period[1])
    me = calendar.month_ends
    formation = me[(me >= start) & (me <= end)]
    if len(formation) == 0:
        raise DataError(f"no month-ends inside period {start.date()}..{end.date()}")

    pivot = _signal_pivot(signals)
    eq = monthly_equity[monthly_equity["monthly_return"].notna()]
    returns_by_month = {m: g.set_index("security_id")["monthly_return"]
                        for m, g in eq.groupby("month_end", sort=True)}

    snapshots = []
    dates, values, nholds = [], [], []
    missing_events: list = []
    for t in formation:
        pos = calendar.month_end_index(t)
        if pos + 1 >= len(me):
            break  # no realization month for the final calendar month
        window = _window_months(calendar, t, L)
        if window is None:
            avg = pd.Series(dtype=float)
        else:
            avg = _window_mean(pivot, window, L, min_months)
        snapshot = PortfolioSnapshot(month_end=t, holdings=select_and_weight(avg),
                                     lookback_used=L)
        snapshots.append(snapshot)

        realization = me[pos + 1]
        next_returns = returns_by_month.get(realization, pd.Series(dtype=float))
        if snapshot.holdings:
            r, missing = portfolio_return(snapshot, next_returns)
            missing_events.extend((realization, sec) for sec in missing)
        elif empty_month == "risk_free":
            rf = risk_free.get(realization, np.nan)
            if pd.isna(rf):
                raise DataError(f"risk-free rate missing for {realization.date()}")
            r = float(rf)
        else:
            r = 0.0
        dates.append(realization)
        values.append(r)
        nholds.append(snapshot.n_holdings)

    monthly = pd.Series(values, index=pd.DatetimeIndex(dates), name="portfolio_return")
    cumulative = cumulative_returns(monthly) if len(monthly) else pd.Series(dtype=float)
    config = {"lookback": L, "period": (str(start.date()), str(end.date())),
              "empty_month": empty_month, "n_holdings": nholds}
    return BacktestResult(monthly_returns=monthly, cumulative=cumulative,
                          snapshots=snapshots, config=config,
                          missing_return_events=missing_events)
