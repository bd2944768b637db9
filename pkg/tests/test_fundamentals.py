import numpy as np
import pandas as pd
import pytest

from cashfactor.errors import UniverseError
from cashfactor.fundamentals import (FILING_FIELDS, UniverseConfig, apply_pit_lag,
                                     build_panel, filter_universe, forward_fill_monthly)
from cashfactor.trading_calendar import build_trading_calendar


def filings_frame(rows):
    cols = ["firm_id", "report_date"] + FILING_FIELDS
    df = pd.DataFrame(rows, columns=cols)
    df["report_date"] = pd.to_datetime(df["report_date"])
    return df


def filing_row(firm, rdq, assets=1000.0, cash=200.0, debt=300.0, earnings=50.0,
               rnd=20.0, interest=10.0, dividends=5.0):
    return (firm, rdq, assets, cash, debt, earnings, rnd, interest, dividends)


@pytest.fixture
def calendar():
    return build_trading_calendar(pd.bdate_range("2021-01-01", "2021-06-30"))


class TestPitLag:
    def test_report_on_month_end_effective_next_month(self, calendar):
        # 2021-01-29 is January's last business day
        out = apply_pit_lag(filings_frame([filing_row("A", "2021-01-29")]), calendar)
        assert out.loc[0, "effective_date"] == pd.Timestamp("2021-02-01")
        assert out.loc[0, "effective_month"] == pd.Timestamp("2021-02-26")

    def test_mid_month_report_effective_same_month(self, calendar):
        out = apply_pit_lag(filings_frame([filing_row("A", "2021-01-13")]), calendar)
        assert out.loc[0, "effective_date"] == pd.Timestamp("2021-01-14")
        assert out.loc[0, "effective_month"] == pd.Timestamp("2021-01-29")

    def test_gap_in_calendar_pushes_effective_date(self):
        # Friday 2021-01-15 report, Monday 2021-01-18 closed: next open day Tuesday
        days = ["2021-01-14", "2021-01-15", "2021-01-19", "2021-01-29"]
        cal = build_trading_calendar(days)
        out = apply_pit_lag(filings_frame([filing_row("A", "2021-01-15")]), cal)
        assert out.loc[0, "effective_date"] == pd.Timestamp("2021-01-19")

    def test_report_after_calendar_end_dropped(self, calendar, caplog):
        with caplog.at_level("WARNING"):
            out = apply_pit_lag(filings_frame([filing_row("A", "2021-06-30")]), calendar)
        assert out.empty
        assert "after the last calendar day" in caplog.text

    def test_missing_report_date_dropped(self, calendar, caplog):
        with caplog.at_level("WARNING"):
            out = apply_pit_lag(filings_frame([filing_row("A", None),
                                               filing_row("A", "2021-02-10")]), calendar)
        assert len(out) == 1
        assert "without a report date" in caplog.text


class TestForwardFill:
    def test_carry_forward(self, calendar):
        eff = apply_pit_lag(filings_frame([filing_row("A", "2021-03-01", cash=123.0)]), calendar)
        out = forward_fill_monthly(eff, calendar, max_staleness_months=6)
        months = set(out["month_end"])
        assert pd.Timestamp("2021-04-30") in months and pd.Timestamp("2021-05-31") in months
        assert (out["cash_holdings"] == 123.0).all()

    def test_newer_filing_wins(self, calendar):
        eff = apply_pit_lag(filings_frame([
            filing_row("A", "2021-03-01", cash=100.0),
            filing_row("A", "2021-06-01", cash=200.0),
        ]), calendar)
        out = forward_fill_monthly(eff, calendar, 6).set_index("month_end")
        assert out.loc[pd.Timestamp("2021-06-30"), "cash_holdings"] == 200.0
        assert out.loc[pd.Timestamp("2021-05-31"), "cash_holdings"] == 100.0

    def test_staleness_cap_drops_rows(self):
        cal = build_trading_calendar(pd.bdate_range("2021-01-01", "2021-12-31"))
        eff = apply_pit_lag(filings_frame([filing_row("A", "2021-01-05")]), cal)
        out = forward_fill_monthly(eff, cal, max_staleness_months=6)
        # effective January; September is 8 months later, past the cap
        assert pd.Timestamp("2021-07-30") in set(out["month_end"])
        assert pd.Timestamp("2021-09-30") not in set(out["month_end"])

    def test_lag_columns_track_previous_filing(self, calendar):
        eff = apply_pit_lag(filings_frame([
            filing_row("A", "2021-01-05", cash=100.0),
            filing_row("A", "2021-04-01", cash=150.0),
        ]), calendar)
        out = forward_fill_monthly(eff, calendar, 6).set_index("month_end")
        apr = out.loc[pd.Timestamp("2021-04-30")]
        assert apr["cash_holdings"] == 150.0 and apr["lag_cash_holdings"] == 100.0
        jan = out.loc[pd.Timestamp("2021-01-29")]
        assert np.isnan(jan["lag_cash_holdings"])

    def test_idempotence_on_own_output(self, calendar):
        eff = apply_pit_lag(filings_frame([
            filing_row("A", "2021-01-05", cash=100.0),
            filing_row("A", "2021-04-01", cash=150.0),
            filing_row("B", "2021-02-10", cash=70.0),
        ]), calendar)
        once = forward_fill_monthly(eff, calendar, 6)
        refeed = once[["firm_id", "month_end"] + FILING_FIELDS].copy()
        refeed["effective_month"] = refeed["month_end"]
        refeed["report_date"] = refeed["month_end"]
        twice = forward_fill_monthly(refeed, calendar, 6)
        a = once[["firm_id", "month_end"] + FILING_FIELDS].reset_index(drop=True)
        b = twice[["firm_id", "month_end"] + FILING_FIELDS].reset_index(drop=True)
        pd.testing.assert_frame_equal(a, b)

    def test_delta_telescoping(self, calendar):
        cash_path = [100.0, 140.0, 90.0, 260.0]
        rdqs = ["2021-01-05", "2021-02-03", "2021-03-03", "2021-04-06"]
        eff = apply_pit_lag(filings_frame(
            [filing_row("A", r, cash=c) for r, c in zip(rdqs, cash_path)]), calendar)
        out = forward_fill_monthly(eff, calendar, 6)
        per_filing = out.drop_duplicates(subset="effective_month")
        deltas = (per_filing["cash_holdings"] - per_filing["lag_cash_holdings"]).dropna()
        total = float(deltas.sum())
        assert abs(total - (cash_path[-1] - cash_path[0])) <= 1e-9 * max(1.0, abs(total))


def links_frame(rows):
    df = pd.DataFrame(rows, columns=["firm_id", "security_id", "sic_code"])
    df["link_start"] = pd.NaT
    df["link_end"] = pd.NaT
    return df


class TestUniverse:
    def setup_method(self):
        self.filings = filings_frame([filing_row("G1", "2021-01-05"),
                                      filing_row("G2", "2021-01-05"),
                                      filing_row("G3", "2021-01-05")])
        self.prices = pd.DataFrame({
            "security_id": ["P1", "P2", "P3"],
            "month_end": pd.to_datetime(["2021-01-29"] * 3),
        })

    def test_sic_exclusion(self):
        links = links_frame([("G1", "P1", 6021), ("G2", "P2", 7372)])
        out = filter_universe(links, self.filings, self.prices, UniverseConfig())
        assert list(out["firm_id"]) == ["G2"]
        assert out.attrs["exclusion_counts"]["sic_excluded"] == 1

    def test_handpicked_mode(self):
        links = links_frame([("G1", "P1", 7372), ("G2", "P2", 3674), ("G3", "P3", 2836)])
        cfg = UniverseConfig(mode="handpicked", ids=("P1", "P3"))
        out = filter_universe(links, self.filings, self.prices, cfg)
        assert sorted(out["security_id"]) == ["P1", "P3"]

    def test_data_availability_intersection(self):
        links = links_frame([("G1", "P1", 7372), ("GX", "PX", 7372)])
        out = filter_universe(links, self.filings, self.prices, UniverseConfig())
        assert list(out["firm_id"]) == ["G1"]

    def test_empty_universe_raises_with_counts(self):
        links = links_frame([("G1", "P1", 6021)])
        with pytest.raises(UniverseError) as err:
            filter_universe(links, self.filings, self.prices, UniverseConfig())
        assert "sic_excluded" in str(err.value)


def equity_frame(security_id, month_ends, prices, shares):
    df = pd.DataFrame({
        "security_id": security_id,
        "month_end": pd.to_datetime(month_ends),
        "adj_price": prices,
    })
    df["market_cap"] = df["adj_price"] * shares
    df["monthly_return"] = df["adj_price"].pct_change()
    return df


@pytest.fixture
def panel_inputs(calendar):
    filings = filings_frame([
        filing_row("GX", "2021-01-05", assets=1000.0, cash=200.0, debt=300.0,
                   earnings=50.0, rnd=20.0, interest=10.0, dividends=5.0),
        filing_row("GX", "2021-03-03", assets=1100.0, cash=250.0, debt=280.0,
                   earnings=60.0, rnd=25.0, interest=9.0, dividends=5.0),
    ])
    eff = apply_pit_lag(filings, calendar)
    monthly_fund = forward_fill_monthly(eff, calendar, 6)
    me = calendar.month_ends
    equity = equity_frame("PX", me[:5], [10.0, 11.0, 12.0, 11.5, 12.5], 100.0)
    rf = pd.Series(0.001, index=me)
    pairs = links_frame([("GX", "PX", 7372)])
    return monthly_fund, equity, rf, pairs, calendar


def test_full_regressor_row_matches_hand_recomputation(panel_inputs):
    monthly_fund, equity, rf, pairs, calendar = panel_inputs
    panel = build_panel(monthly_fund, equity, rf, pairs, calendar)
    mar = panel[panel["month_end"] == "2021-03-31"].iloc[0]

    m_t, m_lag = 12.0 * 100, 11.0 * 100
    expected = {
        "x1": (250.0 - 200.0) / m_lag,
        "x2": (60.0 - 50.0) / m_lag,
        "x3": ((1100.0 - 250.0) - (1000.0 - 200.0)) / m_lag,
        "x4": (25.0 - 20.0) / m_lag,
        "x5": (9.0 - 10.0) / m_lag,
        "x6": (5.0 - 5.0) / m_lag,
        "x7": 200.0 / m_lag,
        "x8": 280.0 / (280.0 + m_t),
        "x9": ((280.0 + m_t) - (300.0 + m_lag)) / (300.0 + m_lag),
        "x10": m_lag * (250.0 - 200.0) / (m_t * m_t),
        "x11": (280.0 / (280.0 + m_t)) * (250.0 - 200.0) / m_t,
    }
    for name, value in expected.items():
        assert abs(mar[name] - value) < 1e-14, name
    assert abs(mar["excess_return"] - (12.0 / 11.0 - 1.0 - 0.001)) < 1e-14
    assert mar["leverage"] == mar["x8"]
    assert abs(mar["lagged_market_cap"] - m_lag) < 1e-12


def test_simple_delta_ratio(panel_inputs):
    monthly_fund, equity, rf, pairs, calendar = panel_inputs
    panel = build_panel(monthly_fund, equity, rf, pairs, calendar)
    mar = panel[panel["month_end"] == "2021-03-31"].iloc[0]
    assert abs(mar["x1"] - 50.0 / 1100.0) < 1e-15


def test_repeated_filing_zeroes_deltas(calendar):
    filings = filings_frame([filing_row("GX", "2021-01-05"), filing_row("GX", "2021-03-03")])
    eff = apply_pit_lag(filings, calendar)
    monthly_fund = forward_fill_monthly(eff, calendar, 6)
    me = calendar.month_ends
    equity = equity_frame("PX", me[:5], [10.0, 11.0, 12.0, 11.5, 12.5], 100.0)
    rf = pd.Series(0.0, index=me)
    panel = build_panel(monthly_fund, equity, rf, links_frame([("GX", "PX", 7372)]), calendar)
    row = panel[panel["month_end"] == "2021-03-31"].iloc[0]
    for c in ("x1", "x2", "x3", "x4", "x5", "x6", "x10", "x11"):
        assert row[c] == 0.0, c


def test_rows_before_second_filing_excluded(panel_inputs):
    monthly_fund, equity, rf, pairs, calendar = panel_inputs
    panel = build_panel(monthly_fund, equity, rf, pairs, calendar)
    assert panel["month_end"].min() == pd.Timestamp("2021-03-31")


def test_missing_lagged_market_cap_excludes_row(panel_inputs):
    monthly_fund, equity, rf, pairs, calendar = panel_inputs
    gap = equity[equity["month_end"] != "2021-02-26"]
    panel = build_panel(monthly_fund, gap, rf, pairs, calendar)
    # March row needs February market cap, which is gone
    assert "2021-03-31" not in set(panel["month_end"].dt.strftime("%Y-%m-%d"))


def test_admitted_rows_finite_with_positive_lag_cap(panel_inputs):
    monthly_fund, equity, rf, pairs, calendar = panel_inputs
    panel = build_panel(monthly_fund, equity, rf, pairs, calendar)
    xcols = [f"x{i}" for i in range(1, 12)]
    assert np.isfinite(panel[xcols].to_numpy()).all()
    assert (panel["lagged_market_cap"] > 0).all()


def test_link_date_range_limits_months(panel_inputs):
    monthly_fund, equity, rf, pairs, calendar = panel_inputs
    pairs = pairs.copy()
    pairs["link_end"] = pd.Timestamp("2021-03-31")
    panel = build_panel(monthly_fund, equity, rf, pairs, calendar)
    assert panel["month_end"].max() == pd.Timestamp("2021-03-31")


def test_no_lookahead_mutation(panel_inputs):
    monthly_fund_base, equity, rf, pairs, calendar = panel_inputs
    cutoff = pd.Timestamp("2021-04-30")

    def build(filings):
        eff = apply_pit_lag(filings, calendar)
        mf = forward_fill_monthly(eff, calendar, 6)
        return build_panel(mf, equity, rf, pairs, calendar)

    base_filings = filings_frame([
        filing_row("GX", "2021-01-05", cash=200.0),
        filing_row("GX", "2021-03-03", cash=250.0),
        filing_row("GX", "2021-05-04", cash=300.0),
    ])
    mutated = base_filings.copy()
    late = mutated["report_date"] > cutoff
    mutated.loc[late, FILING_FIELDS] = mutated.loc[late, FILING_FIELDS] * 17.0 + 3.0

    a = build(base_filings)
    b = build(mutated)
    a = a[a["month_end"] <= cutoff].reset_index(drop=True)
    b = b[b["month_end"] <= cutoff].reset_index(drop=True)
    pd.testing.assert_frame_equal(a, b)
