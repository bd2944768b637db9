"""Ordinary least squares with classical diagnostics.

One solver serves both the excess-return signal regression and the
factor-alpha regression. The production path factorizes the design matrix
(QR) instead of inverting normal equations, which keeps the near-collinear
interaction regressors well behaved; rank deficiency past a conditioning
threshold raises instead of returning garbage.

`OLSRegression` and `FeatureStandardizer` wrap the same routines behind the
scikit-learn estimator API so they compose with pipelines and grid search.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Mapping, Sequence

import numpy as np
import pandas as pd
from scipy import linalg, stats
from sklearn.base import BaseEstimator, TransformerMixin

from .errors import DataError, SingularFitError, StandardizationError
from .validation import check_unique_names

DEFAULT_INTERCEPT_NAME = "const"
COND_THRESHOLD = 1e12


@dataclass(frozen=True)
class DesignMatrix:
    """Named regression design: values (n x k), response (n), column names."""

    names: tuple
    values: np.ndarray
    response: np.ndarray
    intercept: str | None = DEFAULT_INTERCEPT_NAME

    def __post_init__(self):
        X = np.asarray(self.values, dtype=float)
        y = np.asarray(self.response, dtype=float).reshape(-1)
        names = tuple(check_unique_names(self.names))
        if X.ndim != 2 or X.shape[1] != len(names):
            raise DataError("design values must be n x k with one name per column")
        if X.shape[0] != y.shape[0]:
            raise DataError("design and response lengths differ")
        if not np.all(np.isfinite(X)) or not np.all(np.isfinite(y)):
            raise DataError("design contains non-finite entries")
        if self.intercept is not None and self.intercept not in names:
            raise DataError(f"intercept column '{self.intercept}' not among names")
        object.__setattr__(self, "names", names)
        object.__setattr__(self, "values", X)
        object.__setattr__(self, "response", y)

    @property
    def n_obs(self) -> int:
        return self.values.shape[0]

    @property
    def n_cols(self) -> int:
        return self.values.shape[1]

    @classmethod
    def with_intercept(cls, names: Sequence[str], values, response,
                       intercept_name: str = DEFAULT_INTERCEPT_NAME) -> "DesignMatrix":
        """Prepend an explicit column of ones named `intercept_name`."""
        X = np.asarray(values, dtype=float)
        ones = np.ones((X.shape[0], 1))
        return cls(names=(intercept_name, *names),
                   values=np.hstack([ones, X]),
                   response=response,
                   intercept=intercept_name)


@dataclass(frozen=True)
class RegressionFit:
    """Coefficients plus classical homoskedastic diagnostics."""

    names: tuple
    coefficients: np.ndarray
    std_errors: np.ndarray
    t_stats: np.ndarray
    p_values: np.ndarray
    r_squared: float
    adj_r_squared: float
    residuals: np.ndarray
    n_obs: int
    df_resid: int
    intercept: str | None = DEFAULT_INTERCEPT_NAME

    def coef(self, name: str) -> float:
        return float(self.coefficients[self.names.index(name)])

    def as_table(self) -> pd.DataFrame:
        """Diagnostics table with 95% confidence bounds, one row per term."""
        half = stats.t.ppf(0.975, self.df_resid) * self.std_errors
        return pd.DataFrame({
            "coefficient": self.coefficients,
            "std_err": self.std_errors,
            "t_stat": self.t_stats,
            "p_value": self.p_values,
            "ci_low": self.coefficients - half,
            "ci_high": self.coefficients + half,
        }, index=list(self.names))


@dataclass(frozen=True)
class StandardizationRecord:
    """Per-column location/scale removed by standardize_features."""

    names: tuple
    means: np.ndarray
    scales: np.ndarray

    def destandardize(self, fit: RegressionFit) -> dict:
        """Map coefficients of a standardized fit back to raw-unit betas.

        raw_beta_j = std_beta_j / scale_j; the raw intercept absorbs
        sum(std_beta_j * mean_j / scale_j).
        """
        raw = {}
        shift = 0.0
        for name, mean, scale in zip(self.names, self.means, self.scales):
            beta = fit.coef(name)
            raw[name] = beta / scale
            shift += beta * mean / scale
        if fit.intercept is not None:
            raw[fit.intercept] = fit.coef(fit.intercept) - shift
        return raw


def fit_ols(design: DesignMatrix, cond_threshold: float = COND_THRESHOLD) -> RegressionFit:
    """Estimate coefficients by least squares with full diagnostics.

    Raises SingularFitError naming the offending columns when the design's
    condition number exceeds `cond_threshold`. P-values are two-sided from
    the t distribution with n - k degrees of freedom.
    """
    X, y = design.values, design.response
    n, k = X.shape
    if n < k + 1:
        raise DataError(f"need at least k+1={k + 1} observations, got {n}")

    cond = np.linalg.cond(X)
    q, r = np.linalg.qr(X)
    diag = np.abs(np.diag(r))
    if not np.isfinite(cond) or cond > cond_threshold:
        scale = diag.max() if diag.size else 0.0
        offenders = [design.names[j] for j in range(k)
                     if scale == 0.0 or diag[j] <= scale * k / cond_threshold]
        if not offenders:
            offenders = [design.names[int(np.argmin(diag))]]
        raise SingularFitError(
            f"design is rank deficient (cond={cond:.3e}); suspect columns: {offenders}",
            columns=offenders)

    beta = linalg.solve_triangular(r, q.T @ y)
    residuals = y - X @ beta
    ssr = float(residuals @ residuals)
    centered = y - y.mean()
    sst = float(centered @ centered)
    r_squared = 1.0 - ssr / sst if sst > 0.0 else 0.0
    df_resid = n - k
    adj_r_squared = 1.0 - (1.0 - r_squared) * (n - 1) / df_resid

    sigma2 = ssr / df_resid
    r_inv = linalg.solve_triangular(r, np.eye(k))
    se = np.sqrt(sigma2 * np.sum(r_inv * r_inv, axis=1))
    with np.errstate(divide="ignore", invalid="ignore"):
        t = np.where(se > 0, beta / se, np.where(beta == 0, 0.0, np.inf * np.sign(beta)))
    p = 2.0 * stats.t.sf(np.abs(t), df_resid)

    return RegressionFit(names=design.names, coefficients=beta, std_errors=se,
                         t_stats=t, p_values=p, r_squared=float(r_squared),
                         adj_r_squared=float(adj_r_squared), residuals=residuals,
                         n_obs=n, df_resid=df_resid, intercept=design.intercept)


def standardize_features(design: DesignMatrix) -> tuple[DesignMatrix, StandardizationRecord]:
    """Transform non-intercept columns to mean 0, sample std 1.

    The intercept column is untouched. Raises StandardizationError naming
    any zero-variance column. Returns the new design plus the recorded
    per-column mean/scale for back-transformation and reporting.
    """
    X = design.values.copy()
    names, means, scales = [], [], []
    for j, name in enumerate(design.names):
        if name == design.intercept:
            continue
        mean = X[:, j].mean()
        scale = X[:, j].std(ddof=1)
        if not np.isfinite(scale) or scale <= 0.0:
            raise StandardizationError(f"column '{name}' has zero variance")
        X[:, j] = (X[:, j] - mean) / scale
        names.append(name)
        means.append(mean)
        scales.append(scale)
    record = StandardizationRecord(names=tuple(names), means=np.array(means),
                                   scales=np.array(scales))
    out = DesignMatrix(names=design.names, values=X, response=design.response,
                       intercept=design.intercept)
    return out, record


def predict(fit: RegressionFit, row: Mapping) -> float:
    """Dot product of coefficients with named row values, intercept included.

    Extra names in `row` are ignored; a missing regressor raises.
    """
    total = 0.0
    for name, coef in zip(fit.names, fit.coefficients):
        if name == fit.intercept:
            total += coef
            continue
        if name not in row:
            raise DataError(f"row is missing regressor '{name}'")
        total += coef * float(row[name])
    return float(total)


def _column_names(X) -> list[str]:
    if isinstance(X, pd.DataFrame):
        return [str(c) for c in X.columns]
    return [f"x{j + 1}" for j in range(np.asarray(X).shape[1])]


class OLSRegression(BaseEstimator):
    """Least-squares estimator with diagnostics, scikit-learn style.

    After fit: `coef_`, `intercept_` and the full `result_` RegressionFit.
    """

    def __init__(self, fit_intercept: bool = True, cond_threshold: float = COND_THRESHOLD):
        self.fit_intercept = fit_intercept
        self.cond_threshold = cond_threshold

    def fit(self, X, y):
        names = _column_names(X)
        values = np.asarray(X, dtype=float)
        if self.fit_intercept:
            design = DesignMatrix.with_intercept(names, values, y)
        else:
            design = DesignMatrix(names=tuple(names), values=values, response=y, intercept=None)
        self.result_ = fit_ols(design, cond_threshold=self.cond_threshold)
        self.feature_names_in_ = np.asarray(names, dtype=object)
        if self.fit_intercept:
            self.intercept_ = float(self.result_.coefficients[0])
            self.coef_ = self.result_.coefficients[1:].copy()
        else:
            self.intercept_ = 0.0
            self.coef_ = self.result_.coefficients.copy()
        return self

    def predict(self, X):
        if not hasattr(self, "result_"):
            raise DataError("estimator is not fitted")
        values = np.asarray(X, dtype=float)
        return values @ self.coef_ + self.intercept_


class FeatureStandardizer(BaseEstimator, TransformerMixin):
    """Mean-0 / sample-std-1 column transform that remembers its parameters."""

    def fit(self, X, y=None):
        values = np.asarray(X, dtype=float)
        self.feature_names_in_ = np.asarray(_column_names(X), dtype=object)
        self.mean_ = values.mean(axis=0)
        self.scale_ = values.std(axis=0, ddof=1)
        bad = ~(np.isfinite(self.scale_) & (self.scale_ > 0.0))
        if bad.any():
            names = [str(n) for n, b in zip(self.feature_names_in_, bad) if b]
            raise StandardizationError(f"zero-variance columns: {names}")
        return self

    def transform(self, X):
        if not hasattr(self, "scale_"):
            raise DataError("transformer is not fitted")
        values = np.asarray(X, dtype=float)
        out = (values - self.mean_) / self.scale_
        if isinstance(X, pd.DataFrame):
            return pd.DataFrame(out, index=X.index, columns=X.columns)
        return out

    def record(self) -> StandardizationRecord:
        return StandardizationRecord(names=tuple(str(n) for n in self.feature_names_in_),
                                     means=self.mean_.copy(), scales=self.scale_.copy())
