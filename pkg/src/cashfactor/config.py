"""Run configuration: a flat key = value file plus CLI overrides.

Keys use dotted sections (universe.mode, signal.window, ...); values are
plain strings parsed per field. Any CLI flag overrides the file value.
"""
from __future__ import annotations

import logging
from dataclasses import dataclass, field
from pathlib import Path

import pandas as pd

from .errors import ConfigError

logger = logging.getLogger(__name__)

DEFAULTS = {
    "universe.mode": "nasdaq",
    "universe.ids": "",
    "universe.exclude_sic_from": "6000",
    "universe.exclude_sic_to": "6799",
    "universe.coverage_start": "",
    "universe.coverage_end": "",
    "pit.max_staleness_months": "6",
    "signal.window": "expanding",
    "signal.min_obs": "60",
    "signal.winsor_low": "1",
    "signal.winsor_high": "99",
    "signal.allow_negative_acv_base": "false",
    "backtest.lookback": "optimize",
    "backtest.train_start": "2010-01-01",
    "backtest.train_end": "2015-01-01",
    "backtest.test_start": "2015-01-01",
    "backtest.test_end": "2023-12-31",
    "backtest.empty_month": "zero",
    "optimize.l_min": "1",
    "optimize.l_max": "24",
    "optimize.ftol": "1e-8",
    "optimize.xtol": "1e-6",
    "optimize.maxiter": "100",
    "output.dir": "out",
    "seed": "0",
}


def parse_config_file(path) -> dict:
    """Parse `key = value` lines; '#' starts a comment; blank lines ignored."""
    path = Path(path)
    if not path.exists():
        raise ConfigError(f"config file not found: {path}")
    values: dict[str, str] = {}
    for lineno, raw in enumerate(path.read_text().splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"{path}: line {lineno}: expected 'key = value', got {raw!r}")
        key, value = line.split("=", 1)
        values[key.strip()] = value.strip()
    return values


def _parse_bool(value: str, key: str) -> bool:
    low = value.strip().lower()
    if low in ("true", "yes", "1"):
        return True
    if low in ("false", "no", "0"):
        return False
    raise ConfigError(f"{key}: expected a boolean, got {value!r}")


def _parse_date(value: str, key: str):
    if not value:
        return None
    try:
        return pd.Timestamp(value)
    except ValueError as exc:
        raise ConfigError(f"{key}: unparsable date {value!r}") from exc


@dataclass
class RunConfig:
    prices_path: Path
    fundamentals_path: Path
    link_path: Path
    factors_path: Path
    calendar_path: Path
    benchmarks_path: Path | None = None

    universe_mode: str = "nasdaq"
    universe_ids: tuple = ()
    exclude_sic_from: int = 6000
    exclude_sic_to: int = 6799
    coverage_start: pd.Timestamp | None = None
    coverage_end: pd.Timestamp | None = None

    max_staleness_months: int = 6

    signal_window: str = "expanding"
    rolling_months: int = 60
    min_obs: int = 60
    winsor_low: float = 1.0
    winsor_high: float = 99.0
    allow_negative_acv_base: bool = False

    lookback: int | str = "optimize"
    train_start: pd.Timestamp = field(default_factory=lambda: pd.Timestamp("2010-01-01"))
    train_end: pd.Timestamp = field(default_factory=lambda: pd.Timestamp("2015-01-01"))
    test_start: pd.Timestamp = field(default_factory=lambda: pd.Timestamp("2015-01-01"))
    test_end: pd.Timestamp = field(default_factory=lambda: pd.Timestamp("2023-12-31"))
    empty_month: str = "zero"

    l_min: int = 1
    l_max: int = 24
    ftol: float = 1e-8
    xtol: float = 1e-6
    maxiter: int = 100

    out_dir: Path = Path("out")
    seed: int = 0

    @classmethod
    def from_mapping(cls, values: dict) -> "RunConfig":
        merged = dict(DEFAULTS)
        merged.update({k: v for k, v in values.items() if v is not None})
        for key in ("data.prices", "data.fundamentals", "data.link",
                    "data.factors", "data.calendar"):
            if key not in merged:
                raise ConfigError(f"missing required config key '{key}'")
        try:
            window = merged["signal.window"]
            rolling_months = 60
            if window.startswith("rolling"):
                inner = window[len("rolling"):].strip("() ")
                rolling_months = int(inner) if inner else 60
                window = "rolling"
            lookback = merged["backtest.lookback"]
            if lookback != "optimize":
                lookback = int(lookback)
            ids = tuple(s.strip() for s in merged["universe.ids"].split(",") if s.strip())
            benchmarks = merged.get("data.benchmarks", "")
            return cls(
                prices_path=Path(merged["data.prices"]),
                fundamentals_path=Path(merged["data.fundamentals"]),
                link_path=Path(merged["data.link"]),
                factors_path=Path(merged["data.factors"]),
                calendar_path=Path(merged["data.calendar"]),
                benchmarks_path=Path(benchmarks) if benchmarks else None,
                universe_mode=merged["universe.mode"],
                universe_ids=ids,
                exclude_sic_from=int(merged["universe.exclude_sic_from"]),
                exclude_sic_to=int(merged["universe.exclude_sic_to"]),
                coverage_start=_parse_date(merged["universe.coverage_start"], "universe.coverage_start"),
                coverage_end=_parse_date(merged["universe.coverage_end"], "universe.coverage_end"),
                max_staleness_months=int(merged["pit.max_staleness_months"]),
                signal_window=window,
                rolling_months=rolling_months,
                min_obs=int(merged["signal.min_obs"]),
                winsor_low=float(merged["signal.winsor_low"]),
                winsor_high=float(merged["signal.winsor_high"]),
                allow_negative_acv_base=_parse_bool(merged["signal.allow_negative_acv_base"],
                                                    "signal.allow_negative_acv_base"),
                lookback=lookback,
                train_start=_parse_date(merged["backtest.train_start"], "backtest.train_start"),
                train_end=_parse_date(merged["backtest.train_end"], "backtest.train_end"),
                test_start=_parse_date(merged["backtest.test_start"], "backtest.test_start"),
                test_end=_parse_date(merged["backtest.test_end"], "backtest.test_end"),
                empty_month=merged["backtest.empty_month"],
                l_min=int(merged["optimize.l_min"]),
                l_max=int(merged["optimize.l_max"]),
                ftol=float(merged["optimize.ftol"]),
                xtol=float(merged["optimize.xtol"]),
                maxiter=int(merged["optimize.maxiter"]),
                out_dir=Path(merged["output.dir"]),
                seed=int(merged["seed"]),
            )
        except (ValueError, TypeError) as exc:
            raise ConfigError(f"bad config value: {exc}") from exc

    def validate(self) -> None:
        for label, path in (("data.prices", self.prices_path),
                            ("data.fundamentals", self.fundamentals_path),
                            ("data.link", self.link_path),
                            ("data.factors", self.factors_path),
                            ("data.calendar", self.calendar_path)):
            if not Path(path).exists():
                raise ConfigError(f"{label}: path does not exist: {path}")
        if self.benchmarks_path is not None and not self.benchmarks_path.exists():
            raise ConfigError(f"data.benchmarks: path does not exist: {self.benchmarks_path}")
        if self.train_end > self.test_start:
            raise ConfigError(f"training period end {self.train_end.date()} is after "
                              f"test period start {self.test_start.date()}")
        if self.train_start >= self.train_end:
            raise ConfigError("training period is empty")
        if self.test_start >= self.test_end:
            raise ConfigError("test period is empty")
        if not (0.0 <= self.winsor_low < self.winsor_high <= 100.0):
            raise ConfigError(f"invalid winsor percentiles ({self.winsor_low}, {self.winsor_high})")
        if self.universe_mode not in ("nasdaq", "handpicked"):
            raise ConfigError(f"unknown universe.mode '{self.universe_mode}'")
        if self.universe_mode == "handpicked" and not self.universe_ids:
            raise ConfigError("handpicked universe requires universe.ids")
        if self.empty_month not in ("zero", "risk_free"):
            raise ConfigError(f"unknown backtest.empty_month '{self.empty_month}'")
        if isinstance(self.lookback, int) and self.lookback < 1:
            raise ConfigError(f"lookback must be >= 1, got {self.lookback}")
        if not (1 <= self.l_min <= self.l_max):
            raise ConfigError(f"invalid lookback bounds [{self.l_min}, {self.l_max}]")
