"""Summary metrics and factor-alpha attribution for backtest results.

The summary row reports mean, volatility and Sharpe of monthly excess
returns; the annualized panel scales mean by 12 and volatility and Sharpe
by sqrt(12). Alpha is the intercept of a regression of excess returns on
the standardized market, size, value and momentum factors; the recorded
standardization lets betas be mapped back to raw factor units.
"""
from __future__ import annotations

import logging
from dataclasses import dataclass, field

import numpy as np
import pandas as pd

from .backtest import cumulative_returns
from .errors import AlignmentError, DataError
from .factors import FACTOR_COLUMNS
from .ols import DesignMatrix, RegressionFit, StandardizationRecord, fit_ols, standardize_features
from .optimize import sharpe_ratio

logger = logging.getLogger(__name__)

ANNUALIZATION = 12.0


def summarize(returns: pd.Series, rf: pd.Series, annualize: bool = False) -> dict:
    """Mean / volatility / Sharpe of excess returns for one asset.

    Requires at least 12 monthly observations with risk-free coverage.
    """
    rf_aligned = rf.reindex(returns.index)
    missing = returns.index[rf_aligned.isna()]
    if len(missing):
        raise AlignmentError(f"risk-free rate missing for months: {list(missing.date)}")
    excess = returns - rf_aligned
    if len(excess) < 12:
        raise DataError(f"need >= 12 observations to summarize, got {len(excess)}")
    mean = float(excess.mean())
    vol = float(excess.std(ddof=1))
    sharpe = sharpe_ratio(excess.to_numpy())
    if annualize:
        return {"mean": mean * ANNUALIZATION, "volatility": vol * np.sqrt(ANNUALIZATION),
                "sharpe": sharpe * np.sqrt(ANNUALIZATION)}
    return {"mean": mean, "volatility": vol, "sharpe": sharpe}


def factor_alpha(portfolio_excess: pd.Series, factors: pd.DataFrame,
                 include_momentum: bool = True) -> tuple[RegressionFit, StandardizationRecord]:
    """Regress excess returns on standardized factors; intercept is alpha.

    `factors` must cover every month of the portfolio series; extra factor
    months are ignored. Factors are standardized (the response is not) and
    the per-column mean/scale is returned for back-transformation.
    """
    names = FACTOR_COLUMNS if include_momentum else FACTOR_COLUMNS[:3]
    for name in names:
        if name not in factors.columns:
            raise DataError(f"factor frame lacks column '{name}'")
    missing = portfolio_excess.index.difference(factors.index)
    if len(missing):
        raise AlignmentError(f"factor data missing for months: {list(missing.date)}")
    if len(portfolio_excess) < 24:
        raise DataError(f"need >= 24 aligned months, got {len(portfolio_excess)}")

    X = factors.loc[portfolio_excess.index, names].to_numpy(dtype=float)
    design = DesignMatrix.with_intercept(names, X, portfolio_excess.to_numpy(dtype=float))
    standardized, record = standardize_features(design)
    return fit_ols(standardized), record


def compare_benchmarks(portfolio: pd.Series, benchmarks: dict, rf: pd.Series) -> pd.DataFrame:
    """Month-aligned cumulative return table: portfolio, benchmarks, rf."""
    common = portfolio.index
    for series in list(benchmarks.values()) + [rf]:
        common = common.intersection(series.index)
    if len(common) == 0:
        raise AlignmentError("portfolio and benchmarks share no months")
    common = common.sort_values()
    table = pd.DataFrame(index=common)
    table["portfolio"] = cumulative_returns(portfolio.reindex(common))
    for name, series in benchmarks.items():
        table[name] = cumulative_returns(series.reindex(common))
    table["risk_free"] = cumulative_returns(rf.reindex(common))
    table.index.name = "month_end"
    return table


@dataclass
class PerformanceReport:
    """Metric panels plus the portfolio's factor regression."""

    monthly: pd.DataFrame
    annualized: pd.DataFrame
    alpha_regression: RegressionFit
    standardization: StandardizationRecord
    excess_series: dict = field(default_factory=dict, repr=False)

    def to_dict(self) -> dict:
        reg = self.alpha_regression.as_table()
        return {
            "monthly": self.monthly.to_dict(orient="index"),
            "annualized": self.annualized.to_dict(orient="index"),
            "alpha_regression": {
                "terms": {name: {k: float(v) for k, v in row.items()}
                          for name, row in reg.iterrows()},
                "r_squared": self.alpha_regression.r_squared,
                "adj_r_squared": self.alpha_regression.adj_r_squared,
                "n_obs": self.alpha_regression.n_obs,
                "raw_factor_betas": {
                    k: float(v) for k, v in
                    self.standardization.destandardize(self.alpha_regression).items()
                },
            },
        }


def build_performance_report(returns_by_asset: dict, rf: pd.Series,
                             factors: pd.DataFrame, portfolio_name: str = "portfolio",
                             include_momentum: bool = True) -> PerformanceReport:
    """Assemble Table-1-style panels and the portfolio factor regression.

    Every asset gets monthly and annualized metric rows; assets with at
    least 24 aligned months also get an alpha from their own factor
    regression. The detailed regression reported is the named portfolio's.
    """
    if portfolio_name not in returns_by_asset:
        raise DataError(f"asset '{portfolio_name}' missing from returns")
    monthly_rows, annual_rows, excess_series = {}, {}, {}
    fits: dict[str, RegressionFit] = {}
    record = None
    for name, series in returns_by_asset.items():
        monthly_rows[name] = summarize(series, rf, annualize=False)
        annual_rows[name] = summarize(series, rf, annualize=True)
        excess = series - rf.reindex(series.index)
        excess_series[name] = excess
        try:
            fit, rec = factor_alpha(excess, factors, include_momentum=include_momentum)
        except (DataError, AlignmentError) as exc:
            logger.warning("no alpha regression for %s: %s", name, exc)
            monthly_rows[name]["alpha"] = np.nan
            annual_rows[name]["alpha"] = np.nan
            continue
        fits[name] = fit
        if name == portfolio_name:
            record = rec
        alpha = fit.coef(fit.intercept)
        monthly_rows[name]["alpha"] = alpha
        annual_rows[name]["alpha"] = alpha * ANNUALIZATION

    if portfolio_name not in fits:
        raise DataError(f"factor regression unavailable for '{portfolio_name}'")
    order = list(returns_by_asset)
    return PerformanceReport(
        monthly=pd.DataFrame.from_dict(monthly_rows, orient="index").loc[order],
        annualized=pd.DataFrame.from_dict(annual_rows, orient="index").loc[order],
        alpha_regression=fits[portfolio_name],
        standardization=record,
        excess_series=excess_series,
    )
