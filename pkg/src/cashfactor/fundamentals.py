"""Point-in-time fundamentals: lagging, forward-fill, universe, panel build.

Quarterly filings become investable information one trading day after their
report date ("trade today on yesterday's information") and are then mapped
to the first month-end trading day at or after that. Between filings the
latest filing is carried forward, up to a staleness cap. The merged panel
pairs each firm-month with the current and previous filing so that
filing-over-filing deltas, scaled by lagged market cap, can be formed.

Critical fields (cash holdings, total assets, earnings) exclude the row
when missing; non-critical fields (R&D, interest, dividends, total debt)
are imputed to zero.
"""
from __future__ import annotations

import logging
from dataclasses import dataclass, field

import numpy as np
import pandas as pd

from .errors import DataError, UniverseError
from .trading_calendar import TradingCalendar

logger = logging.getLogger(__name__)

#: filing value columns in canonical order
FILING_FIELDS = [
    "total_assets", "cash_holdings", "total_debt", "earnings",
    "rnd_expense", "interest_expense", "dividends_paid",
]
CRITICAL_FIELDS = ["total_assets", "cash_holdings", "earnings"]
ZERO_IMPUTED_FIELDS = ["total_debt", "rnd_expense", "interest_expense", "dividends_paid"]

#: regressor columns of the firm-month panel, in model order
REGRESSOR_COLUMNS = [f"x{i}" for i in range(1, 12)]


@dataclass
class UniverseConfig:
    mode: str = "nasdaq"                 # "nasdaq" | "handpicked"
    ids: tuple = ()                      # security ids for handpicked mode
    exclude_sic_from: int = 6000
    exclude_sic_to: int = 6799
    coverage_start: pd.Timestamp | None = None
    coverage_end: pd.Timestamp | None = None


def apply_pit_lag(filings: pd.DataFrame, calendar: TradingCalendar) -> pd.DataFrame:
    """Stamp each filing with its point-in-time effective date and month.

    effective_date is the first trading day strictly after report_date;
    effective_month the first month-end at or after effective_date. Filings
    whose report date falls on or after the last calendar day are dropped
    with a diagnostic, as are rows missing a report date.
    """
    filings = filings.copy()
    no_rdq = filings["report_date"].isna()
    if no_rdq.any():
        logger.warning("dropping %d filings without a report date", int(no_rdq.sum()))
        filings = filings[~no_rdq]

    pos = calendar.days.searchsorted(filings["report_date"].to_numpy(), side="right")
    off_end = pos >= len(calendar.days)
    if off_end.any():
        logger.warning("dropping %d filings reported after the last calendar day", int(off_end.sum()))
        filings = filings[~off_end]
        pos = pos[~off_end]
    filings["effective_date"] = calendar.days[pos]

    me_pos = calendar.month_ends.searchsorted(filings["effective_date"].to_numpy(), side="left")
    off_me = me_pos >= len(calendar.month_ends)
    if off_me.any():
        logger.warning("dropping %d filings effective past the last month-end", int(off_me.sum()))
        filings = filings[~off_me]
        me_pos = me_pos[~off_me]
    filings["effective_month"] = calendar.month_ends[me_pos]
    return filings.reset_index(drop=True)


def _months_between(later: pd.Series, earlier: pd.Series) -> np.ndarray:
    lp = later.dt.year * 12 + later.dt.month
    ep = earlier.dt.year * 12 + earlier.dt.month
    return (lp - ep).to_numpy()


def forward_fill_monthly(effective: pd.DataFrame, calendar: TradingCalendar,
                         max_staleness_months: int = 6) -> pd.DataFrame:
    """Expand effective-dated filings to a monthly per-firm table.

    For each firm and each calendar month-end at or after its first
    effective month, carries the latest filing with effective month <= that
    month-end, paired with the predecessor filing's values (lag_ columns)
    for delta construction. Rows whose filing is staler than
    `max_staleness_months` calendar months are dropped.

    When two filings collapse onto one effective month the later report
    wins and the superseded one drops out of the lag chain entirely.
    """
    value_cols = [c for c in FILING_FIELDS if c in effective.columns]
    frames = []
    month_ends = calendar.month_ends
    for firm_id, grp in effective.groupby("firm_id", sort=True):
        grp = grp.sort_values(["effective_month", "report_date"], kind="stable")
        grp = grp.drop_duplicates(subset="effective_month", keep="last")
        first = grp["effective_month"].iloc[0]
        months = month_ends[month_ends.searchsorted(first, side="left"):]
        if len(months) == 0:
            continue
        idx = grp["effective_month"].searchsorted(months, side="right") - 1
        cur = grp.iloc[idx].reset_index(drop=True)
        out = pd.DataFrame({"firm_id": firm_id, "month_end": months})
        out["effective_month"] = cur["effective_month"].to_numpy()
        for c in value_cols:
            out[c] = cur[c].to_numpy()
        lag_ok = idx - 1 >= 0
        lag = grp.iloc[np.maximum(idx - 1, 0)].reset_index(drop=True)
        for c in value_cols:
            out["lag_" + c] = np.where(lag_ok, lag[c].to_numpy(), np.nan)
        frames.append(out)
    if not frames:
        return pd.DataFrame(columns=["firm_id", "month_end", "effective_month"]
                            + value_cols + ["lag_" + c for c in value_cols])
    table = pd.concat(frames, ignore_index=True)
    staleness = _months_between(table["month_end"], table["effective_month"])
    table = table[staleness <= max_staleness_months]
    return table.sort_values(["firm_id", "month_end"], kind="stable").reset_index(drop=True)


def filter_universe(links: pd.DataFrame, filings: pd.DataFrame, prices: pd.DataFrame,
                    config: UniverseConfig) -> pd.DataFrame:
    """Admit (firm_id, security_id) pairs into the tradable universe.

    Financials are excluded by SIC range; handpicked mode restricts to an
    explicit security-id list; an optional coverage window requires price
    data spanning it. Raises UniverseError with per-filter exclusion counts
    if nothing survives. Returns the admitted link rows.
    """
    counts: dict[str, int] = {}
    admitted = links.copy()

    sic_excluded = admitted["sic_code"].between(config.exclude_sic_from, config.exclude_sic_to)
    counts["sic_excluded"] = int(sic_excluded.sum())
    admitted = admitted[~sic_excluded]

    if config.mode == "handpicked":
        wanted = set(config.ids)
        out = ~admitted["security_id"].isin(wanted)
        counts["not_handpicked"] = int(out.sum())
        admitted = admitted[~out]

    have_filings = admitted["firm_id"].isin(set(filings["firm_id"]))
    have_prices = admitted["security_id"].isin(set(prices["security_id"]))
    counts["no_fundamentals"] = int((~have_filings).sum())
    counts["no_prices"] = int((have_filings & ~have_prices).sum())
    admitted = admitted[have_filings & have_prices]

    if config.coverage_start is not None and config.coverage_end is not None:
        span = prices.groupby("security_id")["date" if "date" in prices.columns else "month_end"].agg(["min", "max"])
        ok = admitted["security_id"].map(
            lambda s: s in span.index
            and span.loc[s, "min"] <= config.coverage_start
            and span.loc[s, "max"] >= config.coverage_end
        )
        counts["coverage"] = int((~ok).sum())
        admitted = admitted[ok]

    if admitted.empty:
        raise UniverseError(f"universe filtering admitted no pairs; exclusions: {counts}")
    logger.info("universe: admitted %d pairs; exclusions: %s", len(admitted), counts)
    admitted = admitted.reset_index(drop=True)
    admitted.attrs["exclusion_counts"] = counts
    return admitted


def debt_plus_cap_ratio(debt_t, lag_debt, mcap_t, lag_mcap):
    """Relative change of (total debt + market cap).

    Reading of the delta in the numerator: current (debt + cap) minus
    lagged (debt + cap), over lagged (debt + cap). The narrower alternative
    (market cap frozen at its lagged value inside the delta) would be
    `(debt_t + lag_mcap - (lag_debt + lag_mcap)) / (lag_debt + lag_mcap)`.
    """
    return ((debt_t + mcap_t) - (lag_debt + lag_mcap)) / (lag_debt + lag_mcap)


def build_panel(monthly_fund: pd.DataFrame, monthly_equity: pd.DataFrame,
                risk_free: pd.Series, pairs: pd.DataFrame,
                calendar: TradingCalendar) -> pd.DataFrame:
    """Merge monthly fundamentals and equity rows into the regression panel.

    Parameters
    ----------
    monthly_fund : output of forward_fill_monthly
    monthly_equity : output of prices.sample_month_end
    risk_free : monthly risk-free rate indexed by month_end
    pairs : admitted link rows (firm_id, security_id, link_start, link_end)
    calendar : shared trading calendar

    Returns the firm-month panel with excess_return, market caps, leverage,
    current cash holdings and the eleven scaled regressors x1..x11, sorted
    by (firm_id, month_end). Rows lacking a previous filing, a critical
    field, a positive lagged market cap or a finite regressor are excluded.
    """
    eq = monthly_equity.copy()
    me = calendar.month_ends
    pos = pd.Series(np.arange(len(me)), index=me)
    eq["_me_pos"] = eq["month_end"].map(pos)
    eq = eq.sort_values(["security_id", "month_end"], kind="stable")
    prev_cap = eq.groupby("security_id")["market_cap"].shift(1)
    prev_pos = eq.groupby("security_id")["_me_pos"].shift(1)
    eq["lagged_market_cap"] = np.where((eq["_me_pos"] - prev_pos) == 1, prev_cap, np.nan)

    fund_by_firm = dict(tuple(monthly_fund.groupby("firm_id", sort=False)))
    eq_by_sec = dict(tuple(eq.groupby("security_id", sort=False)))

    rows = []
    for pair in pairs.itertuples(index=False):
        f = fund_by_firm.get(pair.firm_id)
        e = eq_by_sec.get(pair.security_id)
        if f is None or e is None:
            continue
        merged = f.drop(columns=["firm_id"]).merge(
            e.drop(columns=["security_id"]), on="month_end", how="inner")
        lo = getattr(pair, "link_start", None)
        hi = getattr(pair, "link_end", None)
        if lo is not None and pd.notna(lo):
            merged = merged[merged["month_end"] >= lo]
        if hi is not None and pd.notna(hi):
            merged = merged[merged["month_end"] <= hi]
        if merged.empty:
            continue
        merged.insert(0, "firm_id", pair.firm_id)
        merged.insert(1, "security_id", pair.security_id)
        rows.append(merged)
    if not rows:
        raise DataError("panel construction produced no firm-month rows")
    panel = pd.concat(rows, ignore_index=True)

    for c in ZERO_IMPUTED_FIELDS:
        panel[c] = panel[c].fillna(0.0)
        panel["lag_" + c] = panel["lag_" + c].fillna(0.0)

    critical_ok = np.ones(len(panel), dtype=bool)
    for c in CRITICAL_FIELDS:
        critical_ok &= panel[c].notna().to_numpy() & panel["lag_" + c].notna().to_numpy()

    m_t = panel["market_cap"].to_numpy(dtype=float)
    m_lag = panel["lagged_market_cap"].to_numpy(dtype=float)
    ret = panel["monthly_return"].to_numpy(dtype=float)
    rf = panel["month_end"].map(risk_free).to_numpy(dtype=float)

    with np.errstate(divide="ignore", invalid="ignore"):
        d_cash = panel["cash_holdings"].to_numpy() - panel["lag_cash_holdings"].to_numpy()
        d_earn = panel["earnings"].to_numpy() - panel["lag_earnings"].to_numpy()
        d_noncash = ((panel["total_assets"].to_numpy() - panel["cash_holdings"].to_numpy())
                     - (panel["lag_total_assets"].to_numpy() - panel["lag_cash_holdings"].to_numpy()))
        d_rnd = panel["rnd_expense"].to_numpy() - panel["lag_rnd_expense"].to_numpy()
        d_int = panel["interest_expense"].to_numpy() - panel["lag_interest_expense"].to_numpy()
        d_div = panel["dividends_paid"].to_numpy() - panel["lag_dividends_paid"].to_numpy()
        debt_t = panel["total_debt"].to_numpy(dtype=float)
        debt_lag = panel["lag_total_debt"].to_numpy(dtype=float)
        leverage = debt_t / (debt_t + m_t)

        panel["x1"] = d_cash / m_lag
        panel["x2"] = d_earn / m_lag
        panel["x3"] = d_noncash / m_lag
        panel["x4"] = d_rnd / m_lag
        panel["x5"] = d_int / m_lag
        panel["x6"] = d_div / m_lag
        panel["x7"] = panel["lag_cash_holdings"].to_numpy() / m_lag
        panel["x8"] = leverage
        panel["x9"] = debt_plus_cap_ratio(debt_t, debt_lag, m_t, m_lag)
        panel["x10"] = m_lag * d_cash / (m_t * m_t)
        panel["x11"] = leverage * d_cash / m_t
        panel["leverage"] = leverage
        panel["excess_return"] = ret - rf

    keep = (
        critical_ok
        & np.isfinite(m_lag) & (m_lag > 0)
        & np.isfinite(m_t) & (m_t > 0)
        & np.isfinite(ret) & np.isfinite(rf)
        & ((debt_lag + m_lag) > 0)
    )
    for c in REGRESSOR_COLUMNS:
        keep &= np.isfinite(panel[c].to_numpy(dtype=float))
    dropped = int((~keep).sum())
    if dropped:
        logger.info("panel: excluded %d firm-months failing row requirements", dropped)

    cols = (["firm_id", "security_id", "month_end", "monthly_return", "excess_return",
             "market_cap", "lagged_market_cap", "leverage", "cash_holdings"]
            + REGRESSOR_COLUMNS)
    out = panel.loc[keep, cols].sort_values(["firm_id", "month_end"], kind="stable")
    return out.reset_index(drop=True)
