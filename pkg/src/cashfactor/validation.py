"""Input validation helpers shared across the package.

Thin wrappers that turn malformed inputs into typed errors early, so the
numerical code can assume clean arrays and frames.
"""
from __future__ import annotations

from typing import Iterable, Sequence

import numpy as np
import pandas as pd

from .errors import DataError, SchemaError


def as_float_array(values, name: str = "values") -> np.ndarray:
    """Coerce to a 1-D float64 array, rejecting non-numeric input."""
    arr = np.asarray(values, dtype=float)
    if arr.ndim != 1:
        arr = arr.reshape(-1)
    return arr


def check_finite(arr: np.ndarray, name: str = "values") -> np.ndarray:
    if not np.all(np.isfinite(arr)):
        bad = int(np.count_nonzero(~np.isfinite(np.asarray(arr, dtype=float))))
        raise DataError(f"{name} contains {bad} non-finite entries")
    return arr


def check_columns(df: pd.DataFrame, required: Sequence[str], filename: str) -> None:
    """Raise SchemaError naming the file and the first missing column."""
    for col in required:
        if col not in df.columns:
            raise SchemaError(f"{filename}: missing required column '{col}'")


def check_unique_names(names: Iterable[str]) -> list[str]:
    names = list(names)
    seen: set[str] = set()
    for n in names:
        if n in seen:
            raise DataError(f"duplicate column name '{n}'")
        seen.add(n)
    return names


def ensure_datetime(series: pd.Series, filename: str, column: str) -> pd.Series:
    """Parse ISO-8601 dates, raising SchemaError with the offending line."""
    parsed = pd.to_datetime(series, format="ISO8601", errors="coerce")
    bad = parsed.isna() & series.notna()
    if bad.any():
        line = int(bad.idxmax()) + 2  # +1 header, +1 zero-based
        raise SchemaError(
            f"{filename}: line {line}, column '{column}': "
            f"unparsable date {series[bad.idxmax()]!r}"
        )
    return parsed
