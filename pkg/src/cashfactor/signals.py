"""Cash-productivity signal: pooled excess-return regression to monthly b.

The pooled panel regression of excess returns on the eleven scaled
regressors is refit on a point-in-time schedule (expanding window by
default). Each month the latest fit prices a marginal unit of cash as
intercept + gamma7 * (lagged cash / lagged cap) + gamma8 * leverage; the
average cash value multiplies that by current cash holdings, and the
signal b is the month-over-month percentage change of the average cash
value, winsorized cross-sectionally.

Both months entering a given b are valued under the same fit, so the
signal reflects movement in firm fundamentals rather than coefficient
drift between refits.
"""
from __future__ import annotations

import logging
from dataclasses import dataclass

import numpy as np
import pandas as pd
from sklearn.base import BaseEstimator, TransformerMixin

from .errors import DataError, NoFitError
from .fundamentals import REGRESSOR_COLUMNS
from .ols import COND_THRESHOLD, DesignMatrix, RegressionFit, fit_ols
from .trading_calendar import TradingCalendar

logger = logging.getLogger(__name__)

SIGNAL_COLUMNS = ["firm_id", "security_id", "month_end", "marginal_cash_value",
                  "avg_cash_value", "b_raw", "b_winsorized", "flags", "fit_id"]

FLAG_NEGATIVE_BASE = "negative_acv_base"
FLAG_NEAR_ZERO_BASE = "near_zero_base"
FLAG_NO_PREV = "no_prev_acv"

ACV_EPS_REL = 1e-9
ACV_EPS_FLOOR = 1e-12


@dataclass
class SignalConfig:
    window: str = "expanding"            # "expanding" | "rolling"
    rolling_months: int = 60
    min_obs: int = 60
    winsor_low: float = 1.0
    winsor_high: float = 99.0
    allow_negative_acv_base: bool = False


def winsorize(values, p_low: float = 1.0, p_high: float = 99.0) -> np.ndarray:
    """Clamp a cross-section at the given linear-interpolation percentiles.

    Values below the p_low percentile are set to it, values above p_high
    likewise; interior values pass through untouched.
    """
    arr = np.asarray(values, dtype=float)
    if arr.size == 0:
        raise DataError("cannot winsorize an empty series")
    if not (0.0 <= p_low < p_high <= 100.0):
        raise DataError(f"invalid winsorization percentiles ({p_low}, {p_high})")
    lo = np.percentile(arr, p_low)
    hi = np.percentile(arr, p_high)
    return np.clip(arr, lo, hi)


class Winsorizer(BaseEstimator, TransformerMixin):
    """Percentile clamp as a transformer: fit learns bounds, transform clips."""

    def __init__(self, p_low: float = 1.0, p_high: float = 99.0):
        self.p_low = p_low
        self.p_high = p_high

    def fit(self, X, y=None):
        arr = np.asarray(X, dtype=float)
        if arr.size == 0:
            raise DataError("cannot winsorize an empty series")
        if not (0.0 <= self.p_low < self.p_high <= 100.0):
            raise DataError(f"invalid winsorization percentiles ({self.p_low}, {self.p_high})")
        self.lower_ = np.percentile(arr, self.p_low, axis=0)
        self.upper_ = np.percentile(arr, self.p_high, axis=0)
        return self

    def transform(self, X):
        arr = np.asarray(X, dtype=float)
        return np.clip(arr, self.lower_, self.upper_)


def fit_fw_regression(panel: pd.DataFrame, as_of, min_obs: int = 60,
                      window: str = "expanding", rolling_months: int = 60,
                      cond_threshold: float = COND_THRESHOLD) -> RegressionFit:
    """Pooled OLS of excess returns on x1..x11 over rows dated <= as_of.

    Zero-variance regressors in the window are dropped with a warning and
    read as coefficient 0 downstream. Raises NoFitError until `min_obs`
    rows are available.
    """
    as_of = pd.Timestamp(as_of)
    rows = panel[panel["month_end"] <= as_of]
    if window == "rolling":
        cutoff = as_of.to_period("M") - (rolling_months - 1)
        rows = rows[rows["month_end"].dt.to_period("M") >= cutoff]
    elif window != "expanding":
        raise DataError(f"unknown fit window '{window}'")
    if len(rows) < min_obs:
        raise NoFitError(f"{len(rows)} firm-month rows as of {as_of.date()}, "
                         f"need at least {min_obs}")

    kept = []
    for c in REGRESSOR_COLUMNS:
        col = rows[c].to_numpy(dtype=float)
        if np.ptp(col) > 0.0:
            kept.append(c)
        else:
            logger.warning("fit as of %s: dropping zero-variance regressor %s",
                           as_of.date(), c)
    design = DesignMatrix.with_intercept(kept, rows[kept].to_numpy(dtype=float),
                                         rows["excess_return"].to_numpy(dtype=float))
    return fit_ols(design, cond_threshold=cond_threshold)


def marginal_cash_value(fit: RegressionFit, row) -> float:
    """Model-implied value of one extra unit of cash for a firm-month row.

    intercept + gamma7 * x7 + gamma8 * leverage; coefficients dropped from
    the fit (zero-variance window) contribute 0. `row` must supply x7 and
    leverage.
    """
    coefs = dict(zip(fit.names, fit.coefficients))
    alpha = coefs.get(fit.intercept, 0.0)
    g7 = coefs.get("x7", 0.0)
    g8 = coefs.get("x8", 0.0)
    return float(alpha + g7 * float(row["x7"]) + g8 * float(row["leverage"]))


def average_cash_value(marginal: float, cash_holdings: float) -> float:
    """Marginal cash value scaled by the firm's current cash holdings."""
    return float(marginal) * float(cash_holdings)


def cash_return(avg_series: pd.Series) -> pd.Series:
    """Percentage change of a per-firm average-cash-value series.

    Consecutive index positions are treated as consecutive months. Months
    whose base |ACV_{t-1}| falls below the relative epsilon are undefined
    and dropped.
    """
    vals = avg_series.to_numpy(dtype=float)
    eps = max(ACV_EPS_REL * float(np.median(np.abs(vals))), ACV_EPS_FLOOR)
    prev = np.roll(vals, 1)
    prev[0] = np.nan
    with np.errstate(divide="ignore", invalid="ignore"):
        b = (vals - prev) / prev
    b[np.abs(prev) < eps] = np.nan
    out = pd.Series(b, index=avg_series.index, name="b_raw")
    return out.dropna()


def _marginal_and_acv(fit: RegressionFit, rows: pd.DataFrame) -> tuple[np.ndarray, np.ndarray]:
    coefs = dict(zip(fit.names, fit.coefficients))
    alpha = coefs.get(fit.intercept, 0.0)
    g7 = coefs.get("x7", 0.0)
    g8 = coefs.get("x8", 0.0)
    marginal = alpha + g7 * rows["x7"].to_numpy(dtype=float) \
        + g8 * rows["leverage"].to_numpy(dtype=float)
    acv = marginal * rows["cash_holdings"].to_numpy(dtype=float)
    return marginal, acv


def compute_signal_series(panel: pd.DataFrame, calendar: TradingCalendar,
                          config: SignalConfig | None = None,
                          refit_schedule=None) -> pd.DataFrame:
    """Monthly winsorized cash-return signal for every firm in the panel.

    Walks month-ends in order; refits on `refit_schedule` (default: every
    month) and prices each month's and the prior month's average cash
    value under the month's latest available fit. Months before the first
    successful fit carry no signal. The per-firm epsilon guarding the
    percentage-change base uses the median of the firm's own published
    average cash values up to the current month only.
    """
    config = config or SignalConfig()
    months = pd.DatetimeIndex(sorted(panel["month_end"].unique()))
    refit_set = set(pd.DatetimeIndex(refit_schedule)) if refit_schedule is not None \
        else set(months)

    me = calendar.month_ends
    by_month = dict(tuple(panel.groupby("month_end", sort=True)))
    latest_fit: RegressionFit | None = None
    fit_id = ""
    acv_history: dict[tuple, list[float]] = {}
    frames = []

    for t in months:
        if t in refit_set:
            try:
                latest_fit = fit_fw_regression(panel, as_of=t, min_obs=config.min_obs,
                                               window=config.window,
                                               rolling_months=config.rolling_months)
                fit_id = f"fw:{pd.Timestamp(t).date()}"
            except NoFitError:
                pass
        if latest_fit is None:
            continue

        rows_t = by_month.get(t)
        if rows_t is None or rows_t.empty:
            continue
        marginal_t, acv_t = _marginal_and_acv(latest_fit, rows_t)

        pos = calendar.month_end_index(t)
        prev_t = me[pos - 1] if pos > 0 else None
        rows_p = by_month.get(prev_t) if prev_t is not None else None

        acv_prev = np.full(len(rows_t), np.nan)
        if rows_p is not None and not rows_p.empty:
            _, acv_p = _marginal_and_acv(latest_fit, rows_p)
            prev_map = dict(zip(zip(rows_p["firm_id"], rows_p["security_id"]), acv_p))
            keys_t = list(zip(rows_t["firm_id"], rows_t["security_id"]))
            acv_prev = np.array([prev_map.get(k, np.nan) for k in keys_t])
        else:
            keys_t = list(zip(rows_t["firm_id"], rows_t["security_id"]))

        b_raw = np.full(len(rows_t), np.nan)
        flags = [""] * len(rows_t)
        for i, key in enumerate(keys_t):
            hist = acv_history.setdefault(key, [])
            hist.append(float(acv_t[i]))
            if not np.isfinite(acv_prev[i]):
                flags[i] = FLAG_NO_PREV
                continue
            eps = max(ACV_EPS_REL * float(np.median(np.abs(hist))), ACV_EPS_FLOOR)
            if abs(acv_prev[i]) < eps:
                flags[i] = FLAG_NEAR_ZERO_BASE
                continue
            b_raw[i] = (acv_t[i] - acv_prev[i]) / acv_prev[i]
            if acv_prev[i] < 0.0:
                flags[i] = FLAG_NEGATIVE_BASE

        b_winz = np.full(len(rows_t), np.nan)
        defined = np.isfinite(b_raw)
        if defined.any():
            b_winz[defined] = winsorize(b_raw[defined], config.winsor_low, config.winsor_high)

        frames.append(pd.DataFrame({
            "firm_id": rows_t["firm_id"].to_numpy(),
            "security_id": rows_t["security_id"].to_numpy(),
            "month_end": t,
            "marginal_cash_value": marginal_t,
            "avg_cash_value": acv_t,
            "b_raw": b_raw,
            "b_winsorized": b_winz,
            "flags": flags,
            "fit_id": fit_id,
        }))

    if not frames:
        return pd.DataFrame(columns=SIGNAL_COLUMNS)
    out = pd.concat(frames, ignore_index=True)
    return out.sort_values(["month_end", "firm_id"], kind="stable").reset_index(drop=True)


def selectable_signals(signals: pd.DataFrame, allow_negative_acv_base: bool = False) -> pd.DataFrame:
    """Signal rows eligible for portfolio selection.

    Keeps rows with a defined winsorized signal, excluding negative-base
    months unless explicitly allowed.
    """
    ok = np.isfinite(signals["b_winsorized"].to_numpy(dtype=float))
    if not allow_negative_acv_base:
        ok &= (signals["flags"] != FLAG_NEGATIVE_BASE).to_numpy()
    return signals[ok].reset_index(drop=True)
