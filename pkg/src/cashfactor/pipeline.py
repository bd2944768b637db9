"""End-to-end orchestration behind the CLI commands.

Each stage reads what the previous stage persisted, so commands can run
separately; identical config and inputs always produce identical files.
"""
from __future__ import annotations

import logging
from pathlib import Path

import numpy as np
import pandas as pd

from . import dataio
from .backtest import BacktestResult, run_backtest
from .config import RunConfig
from .errors import AlignmentError, ConfigError, DataError
from .factors import compound_monthly, market_benchmark, monthly_factors, monthly_risk_free
from .fundamentals import (FILING_FIELDS, UniverseConfig, apply_pit_lag, build_panel,
                           filter_universe, forward_fill_monthly)
from .optimize import OptimizationResult, optimize_lookback, sharpe_ratio
from .performance import build_performance_report, compare_benchmarks
from .prices import adjust_prices, sample_month_end
from .signals import SignalConfig, compute_signal_series, selectable_signals
from .trading_calendar import TradingCalendar, build_trading_calendar

logger = logging.getLogger(__name__)

PANEL_FILE = "panel.csv"
EQUITY_FILE = "monthly_equity.csv"
INGEST_REPORT_FILE = "ingest_report.json"
SIGNALS_FILE = "signals.csv"
RETURNS_FILE = "backtest_returns.csv"
HOLDINGS_FILE = "holdings.csv"
OPTIMIZATION_FILE = "optimization.json"
PERFORMANCE_JSON = "performance.json"
PERFORMANCE_CSV = "performance.csv"
META_FILE = "backtest_meta.json"
PLOT_CUMULATIVE = "plot_cumulative.csv"
PLOT_HIST = "plot_monthly_hist.csv"
PLOT_LINE = "plot_monthly_line.csv"


def load_calendar(config: RunConfig) -> TradingCalendar:
    return build_trading_calendar(dataio.read_calendar_csv(config.calendar_path))


def _signal_config(config: RunConfig) -> SignalConfig:
    return SignalConfig(window=config.signal_window, rolling_months=config.rolling_months,
                        min_obs=config.min_obs, winsor_low=config.winsor_low,
                        winsor_high=config.winsor_high,
                        allow_negative_acv_base=config.allow_negative_acv_base)


def _universe_config(config: RunConfig) -> UniverseConfig:
    return UniverseConfig(mode=config.universe_mode, ids=config.universe_ids,
                          exclude_sic_from=config.exclude_sic_from,
                          exclude_sic_to=config.exclude_sic_to,
                          coverage_start=config.coverage_start,
                          coverage_end=config.coverage_end)


def run_ingest(config: RunConfig) -> dict:
    """Build and persist the normalized panel plus an ingestion report."""
    out = Path(config.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    calendar = load_calendar(config)

    bars = dataio.read_prices_csv(config.prices_path)
    adjusted = adjust_prices(bars)
    monthly_equity = sample_month_end(adjusted, calendar)

    filings = dataio.read_fundamentals_csv(config.fundamentals_path)
    effective = apply_pit_lag(filings, calendar)
    monthly_fund = forward_fill_monthly(effective, calendar, config.max_staleness_months)

    links = dataio.read_link_csv(config.link_path)
    universe = filter_universe(links, filings, monthly_equity, _universe_config(config))

    daily_factors = dataio.read_factors_csv(config.factors_path)
    rf = monthly_risk_free(daily_factors, calendar)

    panel = build_panel(monthly_fund, monthly_equity, rf, universe, calendar)

    report = {
        "rows": {
            "prices_daily": int(len(bars)),
            "filings": int(len(filings)),
            "filings_effective": int(len(effective)),
            "monthly_equity": int(len(monthly_equity)),
            "monthly_fundamentals": int(len(monthly_fund)),
            "panel": int(len(panel)),
        },
        "universe": {"admitted_pairs": int(len(universe)),
                     **universe.attrs.get("exclusion_counts", {})},
        "rejections": {
            "filings_missing_report_date": int(filings["report_date"].isna().sum()),
        },
        "missing_by_field": {
            "fundamentals": {c: int(filings[c].isna().sum()) for c in FILING_FIELDS},
            "prices": {c: int(bars[c].isna().sum())
                       for c in ("raw_price", "daily_return", "shares_outstanding",
                                 "cfacpr", "cfacshr")},
        },
    }
    dataio.write_panel_csv(panel, out / PANEL_FILE)
    dataio.write_panel_csv(monthly_equity, out / EQUITY_FILE)
    dataio.write_json(report, out / INGEST_REPORT_FILE)
    logger.info("ingest: %d panel rows persisted", len(panel))
    return report


def _load_equity(out: Path) -> pd.DataFrame:
    df = pd.read_csv(out / EQUITY_FILE, dtype={"security_id": str})
    df["month_end"] = pd.to_datetime(df["month_end"])
    return df


def run_signal(config: RunConfig) -> pd.DataFrame:
    """Compute and persist the signal series from the ingested panel."""
    out = Path(config.out_dir)
    panel = dataio.read_panel_csv(out / PANEL_FILE)
    calendar = load_calendar(config)
    signals = compute_signal_series(panel, calendar, _signal_config(config))
    dataio.write_signals_csv(signals, out / SIGNALS_FILE)
    logger.info("signal: %d firm-month signal rows", len(signals))
    return signals


def _training_objective(selectable, monthly_equity, calendar, config, rf):
    """Factory mapping a lookback to its training-period Sharpe.

    Only realized returns dated inside the training window enter the
    Sharpe, so nothing after train_end can influence the chosen lookback.
    """
    def objective(L: int) -> float:
        result = run_backtest(selectable, monthly_equity, L,
                              (config.train_start, config.train_end), calendar,
                              empty_month=config.empty_month, risk_free=rf)
        realized = result.monthly_returns
        realized = realized[realized.index <= config.train_end]
        excess = realized - rf.reindex(realized.index).fillna(0.0)
        return sharpe_ratio(excess.to_numpy())
    return objective


def run_optimize(config: RunConfig) -> OptimizationResult:
    """Search the training-period lookback and persist the trace."""
    out = Path(config.out_dir)
    calendar = load_calendar(config)
    panel = dataio.read_panel_csv(out / PANEL_FILE)
    monthly_equity = _load_equity(out)
    daily_factors = dataio.read_factors_csv(config.factors_path)
    rf = monthly_risk_free(daily_factors, calendar)

    signals = compute_signal_series(panel, calendar, _signal_config(config))
    selectable = selectable_signals(signals, config.allow_negative_acv_base)
    objective = _training_objective(selectable, monthly_equity, calendar, config, rf)
    result = optimize_lookback(objective, (config.l_min, config.l_max),
                               ftol=config.ftol, xtol=config.xtol, maxiter=config.maxiter)
    dataio.write_json(result.as_dict(), out / OPTIMIZATION_FILE)
    return result


def run_backtest_cmd(config: RunConfig) -> BacktestResult:
    """Full backtest: optional lookback optimization, test-period run,
    performance report and plot data."""
    out = Path(config.out_dir)
    calendar = load_calendar(config)
    panel = dataio.read_panel_csv(out / PANEL_FILE)
    monthly_equity = _load_equity(out)
    daily_factors = dataio.read_factors_csv(config.factors_path)
    rf = monthly_risk_free(daily_factors, calendar)

    signals = compute_signal_series(panel, calendar, _signal_config(config))
    dataio.write_signals_csv(signals, out / SIGNALS_FILE)
    selectable = selectable_signals(signals, config.allow_negative_acv_base)

    if config.lookback == "optimize":
        objective = _training_objective(selectable, monthly_equity, calendar, config, rf)
        opt = optimize_lookback(objective, (config.l_min, config.l_max),
                                ftol=config.ftol, xtol=config.xtol, maxiter=config.maxiter)
        dataio.write_json(opt.as_dict(), out / OPTIMIZATION_FILE)
        lookback = opt.best_L
    else:
        lookback = int(config.lookback)

    result = run_backtest(selectable, monthly_equity, lookback,
                          (config.test_start, config.test_end), calendar,
                          empty_month=config.empty_month, risk_free=rf)
    dataio.write_backtest_returns_csv(result, out / RETURNS_FILE)
    dataio.write_holdings_csv(result.snapshots, out / HOLDINGS_FILE)

    meta = {"lookback": int(lookback), "lookback_source": str(config.lookback),
            "universe_mode": config.universe_mode,
            "train_period": [str(config.train_start.date()), str(config.train_end.date())],
            "test_period": [str(config.test_start.date()), str(config.test_end.date())],
            "months_realized": int(result.n_months),
            "missing_return_events": len(result.missing_return_events)}
    dataio.write_json(meta, out / META_FILE)

    _emit_performance_and_plots(config, result, daily_factors, calendar, out)
    return result


def _benchmark_series(config: RunConfig, daily_factors, calendar) -> dict:
    benchmarks = {"market": market_benchmark(daily_factors, calendar)}
    if config.benchmarks_path is not None:
        raw = pd.read_csv(config.benchmarks_path)
        raw["date"] = pd.to_datetime(raw["date"])
        raw = raw.set_index("date").astype(float)
        monthly = compound_monthly(raw, calendar)
        for col in monthly.columns:
            benchmarks[str(col)] = monthly[col]
    return benchmarks


def _emit_performance_and_plots(config, result, daily_factors, calendar, out: Path) -> None:
    rf = monthly_risk_free(daily_factors, calendar)
    benchmarks = _benchmark_series(config, daily_factors, calendar)
    monthly = result.monthly_returns

    try:
        assets = {"portfolio": monthly}
        for name, series in benchmarks.items():
            assets[name] = series.reindex(monthly.index).dropna()
        report = build_performance_report(assets, rf, monthly_factors(daily_factors, calendar),
                                          portfolio_name="portfolio")
        dataio.write_json(report.to_dict(), out / PERFORMANCE_JSON)
        dataio.write_performance_csv(report, out / PERFORMANCE_CSV)
    except (DataError, AlignmentError) as exc:
        logger.warning("performance report skipped: %s", exc)

    try:
        table = compare_benchmarks(monthly, benchmarks, rf)
        dataio.write_plot_cumulative_csv(table, out / PLOT_CUMULATIVE)
    except (DataError, AlignmentError) as exc:
        logger.warning("cumulative comparison skipped: %s", exc)
    if len(monthly):
        dataio.write_plot_monthly_line_csv(monthly, out / PLOT_LINE)
        dataio.write_plot_monthly_hist_csv(monthly, out / PLOT_HIST)


def run_report(config: RunConfig) -> None:
    """Regenerate plot-ready files from persisted backtest results."""
    out = Path(config.out_dir)
    returns_path = out / RETURNS_FILE
    if not returns_path.exists():
        raise DataError(f"no backtest results at {returns_path}; run backtest first")
    df = pd.read_csv(returns_path)
    monthly = pd.Series(df["portfolio_return"].to_numpy(dtype=float),
                        index=pd.to_datetime(df["month_end"]), name="portfolio_return")

    calendar = load_calendar(config)
    daily_factors = dataio.read_factors_csv(config.factors_path)
    rf = monthly_risk_free(daily_factors, calendar)
    benchmarks = _benchmark_series(config, daily_factors, calendar)
    try:
        table = compare_benchmarks(monthly, benchmarks, rf)
        dataio.write_plot_cumulative_csv(table, out / PLOT_CUMULATIVE)
    except (DataError, AlignmentError) as exc:
        logger.warning("cumulative comparison skipped: %s", exc)
    if len(monthly):
        dataio.write_plot_monthly_line_csv(monthly, out / PLOT_LINE)
        dataio.write_plot_monthly_hist_csv(monthly, out / PLOT_HIST)
