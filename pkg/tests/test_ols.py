import numpy as np
import pandas as pd
import pytest

from cashfactor.errors import DataError, SingularFitError, StandardizationError
from cashfactor.ols import (DesignMatrix, FeatureStandardizer, OLSRegression,
                            fit_ols, predict, standardize_features)

from oracles import ols_normal_equations


def test_exact_line_recovered():
    x = np.array([0.0, 1.0, 2.0, 3.0, 4.0])
    y = 2.0 + 3.0 * x
    fit = fit_ols(DesignMatrix.with_intercept(["x"], x[:, None], y))
    assert abs(fit.coef("const") - 2.0) < 1e-12
    assert abs(fit.coef("x") - 3.0) < 1e-12
    assert abs(fit.r_squared - 1.0) < 1e-12
    assert np.abs(fit.residuals).max() < 1e-12


def test_constant_response_zero_slope():
    x = np.array([-2.0, -1.0, 0.0, 1.0, 2.0])
    y = np.full(5, 7.0)
    fit = fit_ols(DesignMatrix.with_intercept(["x"], x[:, None], y))
    assert abs(fit.coef("x")) < 1e-12
    assert fit.r_squared == 0.0


def test_matches_normal_equations_oracle():
    rng = np.random.default_rng(42)
    X = rng.normal(size=(200, 5))
    beta = rng.normal(size=5)
    y = 1.5 + X @ beta + rng.normal(scale=0.01, size=200)
    design = DesignMatrix.with_intercept([f"x{i}" for i in range(5)], X, y)
    fit = fit_ols(design)
    oracle = ols_normal_equations(design.values, y)
    assert np.abs(fit.coefficients - oracle["beta"]).max() < 1e-8
    assert abs(fit.r_squared - oracle["r_squared"]) < 1e-10
    assert np.abs(fit.std_errors - oracle["std_errors"]).max() < 1e-8


def test_residual_orthogonality():
    rng = np.random.default_rng(5)
    X = rng.normal(size=(120, 4))
    y = rng.normal(size=120)
    design = DesignMatrix.with_intercept(list("abcd"), X, y)
    fit = fit_ols(design)
    scale = max(1.0, float(np.abs(design.values).max()))
    dots = design.values.T @ fit.residuals
    assert np.abs(dots).max() / (design.n_obs * scale) <= 1e-8


def test_rank_deficient_design_names_offenders():
    x = np.linspace(0, 1, 30)
    X = np.column_stack([x, 2.0 * x])
    with pytest.raises(SingularFitError) as err:
        fit_ols(DesignMatrix.with_intercept(["a", "a_doubled"], X, x))
    assert "a_doubled" in err.value.columns


def test_scale_equivariance():
    rng = np.random.default_rng(9)
    X = rng.normal(size=(80, 3))
    y = rng.normal(size=80)
    base = fit_ols(DesignMatrix.with_intercept(list("abc"), X, y))
    scaled_X = X.copy()
    scaled_X[:, 1] *= 50.0
    scaled = fit_ols(DesignMatrix.with_intercept(list("abc"), scaled_X, y))
    assert abs(scaled.coef("b") - base.coef("b") / 50.0) < 1e-10
    fitted_base = y - base.residuals
    fitted_scaled = y - scaled.residuals
    assert np.abs(fitted_base - fitted_scaled).max() < 1e-10


def test_noise_column_never_lowers_r_squared():
    rng = np.random.default_rng(17)
    X = rng.normal(size=(150, 3))
    y = 0.5 + X @ np.array([1.0, -2.0, 0.5]) + rng.normal(scale=0.1, size=150)
    small = fit_ols(DesignMatrix.with_intercept(list("abc"), X, y))
    noisy = np.column_stack([X, rng.normal(size=150)])
    big = fit_ols(DesignMatrix.with_intercept(list("abcn"), noisy, y))
    assert big.r_squared >= small.r_squared - 1e-12
    assert big.adj_r_squared <= big.r_squared


def test_t_stats_and_pvalues_against_reference_tables():
    # two-sided p at published 97.5% critical values must be 0.05 to 1e-6
    from scipy import stats as sstats
    for df, crit in ((1, 12.7062047), (10, 2.2281389), (100, 1.9839715)):
        p = 2.0 * sstats.t.sf(crit, df)
        assert abs(p - 0.05) < 1e-6
    # analytic df=1 CDF: F(t) = 1/2 + arctan(t)/pi
    assert abs(sstats.t.cdf(1.0, 1) - 0.75) < 1e-12


def test_pvalue_pipeline_on_planted_fit():
    rng = np.random.default_rng(23)
    x = rng.normal(size=400)
    y = 0.3 * x + rng.normal(size=400)
    fit = fit_ols(DesignMatrix.with_intercept(["x"], x[:, None], y))
    assert np.all((fit.p_values >= 0.0) & (fit.p_values <= 1.0))
    i = fit.names.index("x")
    assert fit.t_stats[i] == pytest.approx(fit.coefficients[i] / fit.std_errors[i])
    assert fit.p_values[i] < 1e-6  # strong planted effect


class TestStandardize:
    def test_one_two_three(self):
        design = DesignMatrix.with_intercept(["x"], np.array([[1.0], [2.0], [3.0]]),
                                             np.zeros(3))
        out, record = standardize_features(design)
        np.testing.assert_allclose(out.values[:, 1], [-1.0, 0.0, 1.0], atol=1e-15)
        assert record.means[0] == 2.0 and record.scales[0] == 1.0

    def test_intercept_untouched(self):
        design = DesignMatrix.with_intercept(["x"], np.array([[1.0], [2.0], [3.0]]),
                                             np.zeros(3))
        out, _ = standardize_features(design)
        np.testing.assert_array_equal(out.values[:, 0], np.ones(3))

    def test_idempotent_on_standardized_input(self):
        rng = np.random.default_rng(2)
        col = rng.normal(size=50)
        col = (col - col.mean()) / col.std(ddof=1)
        design = DesignMatrix.with_intercept(["x"], col[:, None], np.zeros(50))
        out, _ = standardize_features(design)
        np.testing.assert_allclose(out.values[:, 1], col, atol=1e-12)

    def test_constant_column_raises(self):
        design = DesignMatrix.with_intercept(["x"], np.ones((5, 1)), np.zeros(5))
        with pytest.raises(StandardizationError) as err:
            standardize_features(design)
        assert "x" in str(err.value)

    def test_destandardize_maps_back(self):
        rng = np.random.default_rng(31)
        X = rng.normal(loc=3.0, scale=2.0, size=(200, 2))
        y = 1.0 + X @ np.array([0.5, -1.5])
        design = DesignMatrix.with_intercept(["a", "b"], X, y)
        std_design, record = standardize_features(design)
        fit = fit_ols(std_design)
        raw = record.destandardize(fit)
        assert abs(raw["a"] - 0.5) < 1e-10
        assert abs(raw["b"] + 1.5) < 1e-10
        assert abs(raw["const"] - 1.0) < 1e-10


class TestPredict:
    def test_intercept_plus_slope(self):
        x = np.array([0.0, 1.0, 2.0])
        y = 1.0 + 2.0 * x
        fit = fit_ols(DesignMatrix.with_intercept(["x"], x[:, None], y))
        assert predict(fit, {"x": 3.0}) == pytest.approx(7.0, abs=1e-12)

    def test_extra_names_ignored(self):
        x = np.array([0.0, 1.0, 2.0])
        fit = fit_ols(DesignMatrix.with_intercept(["x"], x[:, None], 1.0 + 2.0 * x))
        assert predict(fit, {"x": 3.0, "junk": 99.0}) == predict(fit, {"x": 3.0})

    def test_missing_regressor_raises(self):
        x = np.array([0.0, 1.0, 2.0])
        fit = fit_ols(DesignMatrix.with_intercept(["x"], x[:, None], x))
        with pytest.raises(DataError):
            predict(fit, {"y": 1.0})

    def test_matches_matrix_product_oracle(self):
        rng = np.random.default_rng(77)
        X = rng.normal(size=(60, 3))
        y = X @ np.array([1.0, 2.0, -1.0]) + 0.25
        design = DesignMatrix.with_intercept(list("abc"), X, y)
        fit = fit_ols(design)
        oracle = design.values @ fit.coefficients
        for i in range(10):
            row = dict(zip("abc", X[i]))
            assert abs(predict(fit, row) - oracle[i]) < 1e-10


class TestEstimators:
    def test_sklearn_wrapper_matches_function(self):
        rng = np.random.default_rng(1)
        X = pd.DataFrame(rng.normal(size=(100, 3)), columns=["a", "b", "c"])
        y = 2.0 + X.to_numpy() @ np.array([1.0, 0.5, -0.25]) + rng.normal(scale=0.01, size=100)
        est = OLSRegression().fit(X, y)
        assert abs(est.intercept_ - 2.0) < 0.01
        direct = fit_ols(DesignMatrix.with_intercept(["a", "b", "c"], X.to_numpy(), y))
        np.testing.assert_allclose(est.coef_, direct.coefficients[1:], atol=1e-12)
        np.testing.assert_allclose(est.predict(X), y - direct.residuals, atol=1e-12)

    def test_get_params_roundtrip(self):
        est = OLSRegression(fit_intercept=False, cond_threshold=1e10)
        params = est.get_params()
        clone = OLSRegression(**params)
        assert clone.fit_intercept is False and clone.cond_threshold == 1e10

    def test_standardizer_transformer(self):
        rng = np.random.default_rng(4)
        X = rng.normal(loc=5.0, scale=3.0, size=(50, 2))
        tf = FeatureStandardizer().fit(X)
        out = tf.transform(X)
        np.testing.assert_allclose(out.mean(axis=0), 0.0, atol=1e-12)
        np.testing.assert_allclose(out.std(axis=0, ddof=1), 1.0, atol=1e-12)
        with pytest.raises(StandardizationError):
            FeatureStandardizer().fit(np.ones((10, 1)))


def test_too_few_observations_rejected():
    with pytest.raises(DataError):
        fit_ols(DesignMatrix.with_intercept(["x"], np.array([[1.0], [2.0]]), np.zeros(2)))


def test_nonfinite_design_rejected():
    with pytest.raises(DataError):
        DesignMatrix.with_intercept(["x"], np.array([[np.nan], [1.0], [2.0]]), np.zeros(3))
