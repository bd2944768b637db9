"""Cash-productivity factor signal construction and backtesting."""

from .backtest import (BacktestResult, PortfolioSnapshot, cumulative_returns,
                       lookback_average, portfolio_return, run_backtest,
                       select_and_weight)
from .errors import (AlignmentError, CalendarError, CashfactorError, ConfigError,
                     DataError, NoFitError, NumericalError, OptimizationError,
                     SchemaError, SharpeUndefinedError, SingularFitError,
                     StandardizationError, UniverseError)
from .fundamentals import (UniverseConfig, apply_pit_lag, build_panel,
                           filter_universe, forward_fill_monthly)
from .ols import (DesignMatrix, FeatureStandardizer, OLSRegression, RegressionFit,
                  StandardizationRecord, fit_ols, predict, standardize_features)
from .optimize import (OptimizationResult, golden_section_minimize, optimize_lookback,
                       powell_minimize, sharpe_ratio)
from .performance import (PerformanceReport, build_performance_report,
                          compare_benchmarks, factor_alpha, summarize)
from .prices import adjust_prices, compound_monthly_returns, sample_month_end
from .signals import (SignalConfig, Winsorizer, average_cash_value, cash_return,
                      compute_signal_series, fit_fw_regression, marginal_cash_value,
                      selectable_signals, winsorize)
from .trading_calendar import TradingCalendar, build_trading_calendar

__version__ = "0.1.0"
