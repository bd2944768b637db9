"""File ingestion and emission for every external interface.

Readers validate schemas up front and name the file, line and column of
the first offending value. All numeric output is serialized with 17
significant digits so files round-trip to the exact in-memory doubles,
and every writer is deterministic for identical inputs.
"""
from __future__ import annotations

import csv
import json
import logging
from pathlib import Path

import numpy as np
import pandas as pd

from .errors import SchemaError
from .validation import check_columns, ensure_datetime

logger = logging.getLogger(__name__)

PRICES_COLUMNS = ["permno", "date", "prc", "ret", "shrout", "cfacpr", "cfacshr"]
FUNDAMENTALS_COLUMNS = ["gvkey", "rdq", "atq", "cheq", "dlttq", "ibq", "xrdq", "xintq", "dvq"]
LINK_COLUMNS = ["gvkey", "permno", "sic", "linkdt", "linkenddt"]
FACTORS_COLUMNS = ["date", "mktrf", "smb", "hml", "umd", "rf"]

SIGNALS_HEADER = ["gvkey", "permno", "month_end", "marginal_cash_value",
                  "avg_cash_value", "b_raw", "b_winsorized", "flags"]
RETURNS_HEADER = ["month_end", "portfolio_return", "cumulative_return", "n_holdings"]
HOLDINGS_HEADER = ["month_end", "permno", "weight"]


def fmt_float(x) -> str:
    """17-significant-digit decimal form; empty string for missing."""
    if x is None or (isinstance(x, float) and not np.isfinite(x)) or pd.isna(x):
        return ""
    return format(float(x), ".17g")


def fmt_date(d) -> str:
    return pd.Timestamp(d).strftime("%Y-%m-%d")


def _read_raw(path, required: list[str]) -> pd.DataFrame:
    path = Path(path)
    if not path.exists():
        raise SchemaError(f"{path}: file not found")
    df = pd.read_csv(path, dtype=str, keep_default_na=False)
    check_columns(df, required, path.name)
    return df


def _numeric(df: pd.DataFrame, column: str, filename: str) -> pd.Series:
    raw = df[column].replace("", None)
    out = pd.to_numeric(raw, errors="coerce")
    bad = out.isna() & raw.notna()
    if bad.any():
        idx = int(bad.idxmax())
        raise SchemaError(f"{filename}: line {idx + 2}, column '{column}': "
                          f"non-numeric value {df[column].iloc[idx]!r}")
    return out.astype(float)


def _dates(df: pd.DataFrame, column: str, filename: str) -> pd.Series:
    raw = df[column].replace("", None)
    return ensure_datetime(raw, filename, column)


def read_calendar_csv(path) -> pd.DatetimeIndex:
    df = _read_raw(path, ["date"])
    dates = _dates(df, "date", Path(path).name)
    if dates.isna().any():
        raise SchemaError(f"{Path(path).name}: empty date field")
    return pd.DatetimeIndex(dates)


def read_prices_csv(path) -> pd.DataFrame:
    """Daily bars; negative prices (bid/ask midpoint convention) are
    absolute-valued with a logged count."""
    name = Path(path).name
    df = _read_raw(path, PRICES_COLUMNS)
    out = pd.DataFrame({
        "security_id": df["permno"],
        "date": _dates(df, "date", name),
        "raw_price": _numeric(df, "prc", name),
        "daily_return": _numeric(df, "ret", name),
        "shares_outstanding": _numeric(df, "shrout", name),
        "cfacpr": _numeric(df, "cfacpr", name),
        "cfacshr": _numeric(df, "cfacshr", name),
    })
    if out["date"].isna().any():
        line = int(out["date"].isna().idxmax()) + 2
        raise SchemaError(f"{name}: line {line}, column 'date': empty date")
    negative = out["raw_price"] < 0
    if negative.any():
        logger.info("%s: absolute-valued %d negative prices", name, int(negative.sum()))
        out["raw_price"] = out["raw_price"].abs()
    return out


def read_fundamentals_csv(path) -> pd.DataFrame:
    name = Path(path).name
    df = _read_raw(path, FUNDAMENTALS_COLUMNS)
    return pd.DataFrame({
        "firm_id": df["gvkey"],
        "report_date": _dates(df, "rdq", name),
        "total_assets": _numeric(df, "atq", name),
        "cash_holdings": _numeric(df, "cheq", name),
        "total_debt": _numeric(df, "dlttq", name),
        "earnings": _numeric(df, "ibq", name),
        "rnd_expense": _numeric(df, "xrdq", name),
        "interest_expense": _numeric(df, "xintq", name),
        "dividends_paid": _numeric(df, "dvq", name),
    })


def read_link_csv(path) -> pd.DataFrame:
    name = Path(path).name
    df = _read_raw(path, LINK_COLUMNS)
    sic = _numeric(df, "sic", name)
    if ((sic < 0) | (sic > 9999)).any():
        raise SchemaError(f"{name}: SIC codes must lie in [0, 9999]")
    return pd.DataFrame({
        "firm_id": df["gvkey"],
        "security_id": df["permno"],
        "sic_code": sic.astype(int),
        "link_start": _dates(df, "linkdt", name),
        "link_end": _dates(df, "linkenddt", name),
    })


def read_factors_csv(path) -> pd.DataFrame:
    name = Path(path).name
    df = _read_raw(path, FACTORS_COLUMNS)
    out = pd.DataFrame({c: _numeric(df, c, name) for c in FACTORS_COLUMNS[1:]})
    out.index = pd.DatetimeIndex(_dates(df, "date", name))
    out.index.name = "date"
    return out


def _write_rows(path, header: list[str], rows) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(header)
        writer.writerows(rows)


def write_signals_csv(signals: pd.DataFrame, path) -> None:
    rows = [
        [r.firm_id, r.security_id, fmt_date(r.month_end),
         fmt_float(r.marginal_cash_value), fmt_float(r.avg_cash_value),
         fmt_float(r.b_raw), fmt_float(r.b_winsorized), r.flags]
        for r in signals.itertuples(index=False)
    ]
    _write_rows(path, SIGNALS_HEADER, rows)


def write_backtest_returns_csv(result, path) -> None:
    nholds = result.config.get("n_holdings", [])
    rows = [
        [fmt_date(d), fmt_float(r), fmt_float(c), n]
        for d, r, c, n in zip(result.monthly_returns.index, result.monthly_returns,
                              result.cumulative, nholds)
    ]
    _write_rows(path, RETURNS_HEADER, rows)


def write_holdings_csv(snapshots, path) -> None:
    rows = []
    for snap in snapshots:
        for sec in sorted(snap.holdings):
            rows.append([fmt_date(snap.month_end), sec, fmt_float(snap.holdings[sec])])
    _write_rows(path, HOLDINGS_HEADER, rows)


def write_panel_csv(panel: pd.DataFrame, path) -> None:
    header = list(panel.columns)
    rows = []
    for r in panel.itertuples(index=False):
        row = []
        for col, val in zip(header, r):
            if col == "month_end":
                row.append(fmt_date(val))
            elif col in ("firm_id", "security_id"):
                row.append(val)
            else:
                row.append(fmt_float(val))
        rows.append(row)
    _write_rows(path, header, rows)


def read_panel_csv(path) -> pd.DataFrame:
    df = pd.read_csv(path, dtype={"firm_id": str, "security_id": str})
    df["month_end"] = pd.to_datetime(df["month_end"])
    return df


def read_signals_csv(path) -> pd.DataFrame:
    df = pd.read_csv(path, dtype={"gvkey": str, "permno": str, "flags": str})
    df = df.rename(columns={"gvkey": "firm_id", "permno": "security_id"})
    df["month_end"] = pd.to_datetime(df["month_end"])
    df["flags"] = df["flags"].fillna("")
    return df


def write_json(payload: dict, path) -> None:
    with open(path, "w") as fh:
        json.dump(payload, fh, indent=2, sort_keys=True, default=_json_default)
        fh.write("\n")


def _json_default(obj):
    if isinstance(obj, (np.floating, np.integer)):
        return obj.item()
    if isinstance(obj, pd.Timestamp):
        return fmt_date(obj)
    raise TypeError(f"cannot serialize {type(obj)!r}")


def write_performance_csv(report, path) -> None:
    """Flat form: section,key,metric,value rows covering both panels and
    the regression table."""
    rows = []
    for section, frame in (("monthly", report.monthly), ("annualized", report.annualized)):
        for asset, row in frame.iterrows():
            for metric, value in row.items():
                rows.append([section, asset, metric, fmt_float(value)])
    table = report.alpha_regression.as_table()
    for term, row in table.iterrows():
        for metric, value in row.items():
            rows.append(["alpha_regression", term, metric, fmt_float(value)])
    rows.append(["alpha_regression", "_fit", "r_squared", fmt_float(report.alpha_regression.r_squared)])
    rows.append(["alpha_regression", "_fit", "adj_r_squared", fmt_float(report.alpha_regression.adj_r_squared)])
    _write_rows(path, ["section", "key", "metric", "value"], rows)


def write_plot_cumulative_csv(table: pd.DataFrame, path) -> None:
    header = ["date"] + list(table.columns)
    rows = [[fmt_date(d)] + [fmt_float(v) for v in row]
            for d, row in zip(table.index, table.to_numpy())]
    _write_rows(path, header, rows)


def write_plot_monthly_line_csv(monthly: pd.Series, path) -> None:
    rows = [[fmt_date(d), fmt_float(v)] for d, v in monthly.items()]
    _write_rows(path, ["date", "return"], rows)


def write_plot_monthly_hist_csv(monthly: pd.Series, path, bins: int = 20) -> None:
    counts, edges = np.histogram(monthly.to_numpy(dtype=float), bins=bins)
    rows = [[fmt_float(edges[i]), fmt_float(edges[i + 1]), int(counts[i])]
            for i in range(len(counts))]
    _write_rows(path, ["bin_left", "bin_right", "count"], rows)
