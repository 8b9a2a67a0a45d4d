import json

import numpy as np
import pytest

from conftest import days, hourly
from spotforecast.baseline import (
    FourierForecastConfig,
    combine,
    fit_yearly_harmonics,
    fourier_forecast,
    full_years,
    naive_day,
    naive_forecast,
    z1_yearly_component,
    z2_weekday_reference,
    z3_week_lag,
    z4_trend,
)
from spotforecast.seasonal import HarmonicFit

ONES = np.ones(24)


# --------------------------------------------------------------------- naive


@pytest.mark.parametrize("dow,prev,prev3,prev7,expected", [
    (2, 55, 0, 0, 55),      # Tuesday: yesterday
    (5, 40, 0, 60, 50),     # Friday: mean of yesterday and last week
    (1, 0, 30, 50, 40),     # Monday: mean of last Friday and last week
    (6, 0, 0, 35, 35),      # Saturday: last week
    (7, 1, 2, 36, 36),      # Sunday: last week
])
def test_naive_branches(dow, prev, prev3, prev7, expected):
    out = naive_day(dow, prev * ONES, prev3 * ONES, prev7 * ONES)
    np.testing.assert_array_equal(out, expected * ONES)


def _week_history(n_weeks=2):
    # day value = 10 * day-of-week, hours vary by +hour
    grid = [(10.0 * (d % 7 + 1)) + np.arange(24) for d in range(7 * n_weeks)]
    return days(grid)   # starts on a Monday


def test_naive_forecast_one_week():
    h = _week_history()
    fc = naive_forecast(h, 7)
    grid = fc.values.reshape(7, 24)
    hrs = np.arange(24)
    np.testing.assert_array_equal(grid[0], 0.5 * (50 + 10) + hrs)    # Monday
    np.testing.assert_array_equal(grid[1], grid[0])                   # Tuesday copies Monday forecast
    np.testing.assert_array_equal(grid[4], 0.5 * (grid[3] + 50 + hrs))
    np.testing.assert_array_equal(grid[5], 60 + hrs)
    np.testing.assert_array_equal(grid[6], 70 + hrs)
    assert fc.horizon[0] == h.times[-1] + np.timedelta64(60, "m")
    assert fc.metadata["recursive"] is False


def test_naive_forecast_recursive_flag_and_length():
    fc = naive_forecast(_week_history(), 30)
    assert len(fc) == 720 and fc.metadata["recursive"] is True


def test_naive_needs_history():
    with pytest.raises(ValueError):
        naive_forecast(days(np.ones((5, 24))), 1)


def test_naive_needs_day_alignment():
    with pytest.raises(ValueError):
        naive_forecast(hourly(np.ones(24 * 9), start="2014-01-06T05:00"), 1)


# ------------------------------------------------------------------ components


def _const_fit(c):
    return HarmonicFit(c, np.zeros(8), np.zeros(8), 1.0)


def test_z1_examples():
    fits = {2010: _const_fit(50), 2011: _const_fit(50)}
    cfg = FourierForecastConfig(year_weights={2010: 3, 2011: 7}, trend_years=None)
    assert z1_yearly_component(fits, cfg, 0.3) == pytest.approx(50)

    rng = np.random.default_rng(0)
    f11 = HarmonicFit.from_coefficients(rng.normal(size=17), 1.0)
    fits = {2010: _const_fit(1), 2011: f11}
    only = FourierForecastConfig(year_weights={2010: 0, 2011: 1}, trend_years=None)
    t = np.linspace(0, 1, 9)
    np.testing.assert_allclose(z1_yearly_component(fits, only, t), f11(t), rtol=0, atol=1e-14)

    fits = {2010: _const_fit(40), 2011: _const_fit(60)}
    eq = FourierForecastConfig(year_weights={2010: 1, 2011: 1}, trend_years=None)
    assert z1_yearly_component(fits, eq, 0.5) == pytest.approx(50)


def test_z1_missing_year():
    cfg = FourierForecastConfig(year_weights={2010: 1, 2012: 1}, trend_years=None)
    with pytest.raises(ValueError, match="2012"):
        z1_yearly_component({2010: _const_fit(1)}, cfg, 0.5)


def test_z2_examples():
    # one matching Monday 10:00 in 2013 within the window
    h = days(np.full((7, 24), 1.0), start="2013-03-04T00:00")
    prices = h.prices.copy()
    prices[10] = 47.0
    h = h.with_prices(prices)
    target = np.datetime64("2014-03-03T10:00")
    assert z2_weekday_reference(h, target, 14) == 47.0

    two = days(np.full((14, 24), 1.0), start="2013-03-04T00:00")
    p = two.prices.copy()
    p[10], p[24 * 7 + 10] = 40.0, 60.0
    assert z2_weekday_reference(two.with_prices(p), target, 14) == 50.0


def test_z2_no_match():
    h = days(np.ones((7, 24)), start="2013-03-04T00:00")
    with pytest.raises(ValueError):
        z2_weekday_reference(h, np.datetime64("2014-09-01T10:00"), 14)


def test_z3_examples():
    v = np.full(200, np.nan)
    v[:190] = 0.0
    v[5] = 33.3
    assert z3_week_lag(v, 173) == 33.3
    with pytest.raises(ValueError):
        z3_week_lag(v, 100)
    v[190] = 12.0   # already forecast
    assert z3_week_lag(v, 358) == 12.0
    with pytest.raises(ValueError):
        z3_week_lag(v, 191 + 168)


def _two_years(m1, m2):
    a = np.full(8760, float(m1))
    b = np.full(8760, float(m2))
    return hourly(np.concatenate([a, b]), start="2010-01-01T00:00")


def test_z4_examples():
    assert z4_trend(_two_years(44, 44), 2010, 2011) == 0.0
    assert z4_trend(_two_years(50, 46), 2010, 2011) == pytest.approx(4.0)
    with pytest.raises(ValueError, match="2009"):
        z4_trend(_two_years(50, 46), 2009, 2011)


def test_full_years():
    assert full_years(_two_years(1, 1)) == [2010, 2011]


def test_combine_examples():
    assert combine(50, 50, 50, 0) == 50
    assert combine(40, 50, 60, 2) == pytest.approx(48)
    assert combine(17.5, 1, 2, 0, (100, 0, 0)) == 17.5


# ---------------------------------------------------------------- end-to-end


def test_fourier_constant_history_is_constant():
    h = _two_years(30, 30)
    cfg = FourierForecastConfig.for_history(h)
    assert cfg.year_weights == {2010: 1.0, 2011: 5.0}
    assert cfg.trend_years == (2010, 2011)
    fc = fourier_forecast(h, cfg, 48)
    np.testing.assert_allclose(fc.values, 30.0, atol=1e-9)
    assert fc.horizon[0] == np.datetime64("2012-01-01T00:00")


def test_fourier_trend_applied():
    h = _two_years(50, 46)
    fc = fourier_forecast(h, FourierForecastConfig.for_history(h), 24)
    # z1 mixes the years 1:5, z2 mixes them by matched counts, z3 is 46
    assert fc.metadata["z4"] == pytest.approx(4.0)
    assert np.all(fc.values < 48)


def test_fourier_pure_week_lag():
    rng = np.random.default_rng(0)
    h = hourly(rng.uniform(20, 60, 8760 * 2), start="2010-01-01T00:00")
    cfg = FourierForecastConfig(year_weights={2011: 1}, combination_weights=(0, 0, 1), trend_years=None)
    fc = fourier_forecast(h, cfg, 400)
    np.testing.assert_array_equal(fc.values[:168], h.prices[-168:])
    np.testing.assert_array_equal(fc.values[168:336], h.prices[-168:])


def test_config_round_trip():
    cfg = FourierForecastConfig()
    back = FourierForecastConfig.from_dict(json.loads(cfg.to_json()))
    assert back == cfg
    assert cfg.year_weights[2011] == 10 and cfg.year_weights[2014] == 5


def test_config_validation():
    with pytest.raises(ValueError):
        FourierForecastConfig(year_weights={2011: -1})
    with pytest.raises(ValueError):
        FourierForecastConfig(combination_weights=(0, 0, 0))


def test_fit_yearly_harmonics_one_per_year():
    h = _two_years(10, 20)
    fits = fit_yearly_harmonics(h, [2010, 2011])
    assert fits[2010].a0 == pytest.approx(10) and fits[2011].a0 == pytest.approx(20)
