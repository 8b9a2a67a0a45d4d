import datetime as dt
import json

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from conftest import hourly
from spotforecast.series import (
    ForecastResult,
    IngestError,
    IngestOptions,
    compute_metrics,
    daily_average,
    day_of_week,
    ingest_csv,
    read_forecast_csv,
    split,
    write_forecast_csv,
    write_series_csv,
    year_fraction,
)


def _csv(tmp_path, rows, header="timestamp,price"):
    p = tmp_path / "in.csv"
    p.write_text("\n".join([header, *rows]) + "\n")
    return p


# ----------------------------------------------------------------- ingestion


def test_two_rows(tmp_path):
    s = ingest_csv(_csv(tmp_path, ["2015-01-01T00:00:00+01:00,40.5", "2015-01-01T01:00:00+01:00,41"]))
    assert len(s) == 2
    assert s.utc_offset_minutes == 60
    np.testing.assert_array_equal(s.prices, [40.5, 41.0])
    assert s.times[0] == np.datetime64("2014-12-31T23:00")
    assert s.report.duplicates_averaged == 0 and s.report.gaps_filled == 0


def test_out_of_order_names_line(tmp_path):
    rows = ["2015-01-01T00:00:00+00:00,1", "2015-01-01T02:00:00+00:00,2", "2015-01-01T01:00:00+00:00,3"]
    with pytest.raises(IngestError, match="line 4"):
        ingest_csv(_csv(tmp_path, rows))


def test_duplicate_hour_is_averaged(tmp_path):
    rows = ["2015-01-01T00:00:00+00:00,10", "2015-01-01T01:00:00+00:00,40",
            "2015-01-01T01:00:00+00:00,60", "2015-01-01T02:00:00+00:00,20"]
    s = ingest_csv(_csv(tmp_path, rows))
    np.testing.assert_array_equal(s.prices, [10, 50, 20])
    assert s.report.duplicates_averaged == 1


def test_dst_style_offsets(tmp_path):
    # spring forward: local 02:00 missing, UTC contiguous
    rows = ["2015-03-29T01:00:00+01:00,30", "2015-03-29T03:00:00+02:00,32"]
    s = ingest_csv(_csv(tmp_path, rows))
    assert len(s) == 2 and s.report.gaps_filled == 0
    # fall back: local 02:00 appears twice, distinct UTC instants
    rows = ["2015-10-25T02:00:00+02:00,30", "2015-10-25T02:00:00+01:00,32"]
    s = ingest_csv(_csv(tmp_path, rows))
    assert len(s) == 2


def test_short_gap_interpolated(tmp_path):
    rows = ["2015-01-01T00:00:00+00:00,10", "2015-01-01T03:00:00+00:00,40"]
    s = ingest_csv(_csv(tmp_path, rows))
    np.testing.assert_allclose(s.prices, [10, 20, 30, 40])
    assert s.report.gaps_filled == 2


def test_long_gap_refused(tmp_path):
    rows = ["2015-01-01T00:00:00+00:00,10", "2015-01-01T08:00:00+00:00,40"]
    with pytest.raises(IngestError, match="gap of 7 hours"):
        ingest_csv(_csv(tmp_path, rows))


def test_strict_refuses_normalization(tmp_path):
    rows = ["2015-01-01T00:00:00+00:00,10", "2015-01-01T02:00:00+00:00,40"]
    with pytest.raises(IngestError, match="strict"):
        ingest_csv(_csv(tmp_path, rows), IngestOptions(strict=True))


@pytest.mark.parametrize("row,msg", [
    ("2015-01-01T01:00:00+00:00,abc", "line 3"),
    ("2015-01-01T01:00:00,12", "line 3"),
    ("2015-01-01T01:00:00+00:00,1,2", "line 3"),
    ("2015-01-01T01:30:00+00:00,1", "line 3"),
])
def test_malformed_row(tmp_path, row, msg):
    with pytest.raises(IngestError, match=msg):
        ingest_csv(_csv(tmp_path, ["2015-01-01T00:00:00+00:00,10", row]))


def test_bad_header(tmp_path):
    with pytest.raises(IngestError, match="line 1"):
        ingest_csv(_csv(tmp_path, ["2015-01-01T00:00:00+00:00,10"], header="time,value"))


def test_round_trip(tmp_path):
    s = hourly(np.linspace(-5, 80, 50) + 0.123, offset_minutes=60)
    write_series_csv(s, tmp_path / "a.csv")
    s2 = ingest_csv(tmp_path / "a.csv")
    assert s2 == s


# --------------------------------------------------------------- calendar


def test_day_of_week_monday_is_one():
    t = np.array(["2014-01-06", "2014-01-12"], dtype="datetime64[m]")
    np.testing.assert_array_equal(day_of_week(t), [1, 7])


def test_year_fraction_bounds():
    t = np.array(["2016-01-01T00:00", "2016-12-31T23:00"], dtype="datetime64[m]")
    f = year_fraction(t)
    assert f[0] == 0.0 and 0.99 < f[1] < 1.0


def test_local_calendar_uses_offset():
    s = hourly(np.zeros(3), start="2014-01-06T00:00", offset_minutes=120)
    assert s.hours[0] == 0 and s.days_of_week[0] == 1
    assert s.times[0] == np.datetime64("2014-01-05T22:00")


# ------------------------------------------------------------- daily average


def test_daily_constant():
    d = daily_average(hourly(np.full(24, 42.0)))
    np.testing.assert_array_equal(d.prices, [42.0])


def test_daily_ramp():
    d = daily_average(hourly(np.arange(1, 25)))
    np.testing.assert_array_equal(d.prices, [12.5])


def test_daily_partial_dropped():
    d = daily_average(hourly(np.arange(30)))
    assert len(d) == 1
    assert d.dates[0] == np.datetime64("2014-01-06")


def test_daily_partial_leading_day_dropped():
    d = daily_average(hourly(np.ones(30), start="2014-01-06T18:00"))
    assert len(d) == 1 and d.dates[0] == np.datetime64("2014-01-07")


# --------------------------------------------------------------------- split


def test_split_sizes():
    s = hourly(np.arange(100))
    train, test = split(s, s.times[70])
    assert (len(train), len(test)) == (70, 30)
    assert test.prices[0] == 70


def test_split_cutoff_before_start():
    s = hourly(np.arange(10))
    with pytest.raises(ValueError):
        split(s, s.times[0] - np.timedelta64(60, "m"))


def test_split_accepts_aware_datetime_and_string():
    s = hourly(np.arange(10), offset_minutes=60)
    cut = dt.datetime(2014, 1, 6, 3, tzinfo=dt.timezone(dt.timedelta(hours=1)))
    a, b = split(s, cut)
    a2, b2 = split(s, "2014-01-06T03:00:00+01:00")
    assert len(a) == len(a2) == 3 and len(b) == len(b2) == 7


@settings(max_examples=50, deadline=None)
@given(st.integers(2, 200), st.data())
def test_split_concatenation(n, data):
    s = hourly(np.arange(n, dtype=float))
    k = data.draw(st.integers(1, n - 1))
    a, b = split(s, s.times[k])
    np.testing.assert_array_equal(np.concatenate([a.prices, b.prices]), s.prices)
    np.testing.assert_array_equal(np.concatenate([a.times, b.times]), s.times)
    assert a.times[-1] < b.times[0]


# ------------------------------------------------------------------- metrics


def test_metrics_identity():
    r = compute_metrics([1, 2, 3], [1, 2, 3])
    assert (r.mae, r.rmse, r.mape) == (0, 0, 0)


def test_metrics_zero_actuals():
    r = compute_metrics([0, 0], [3, 4])
    assert r.mae == 3.5
    assert r.rmse == pytest.approx(np.sqrt(12.5))
    assert r.mape is None


def test_metrics_mape():
    assert compute_metrics([100, 200], [110, 180]).mape == pytest.approx(10.0)


def test_metrics_length_mismatch():
    with pytest.raises(ValueError, match="length"):
        compute_metrics([1, 2], [1])


def test_metrics_json_keys():
    r = compute_metrics([1, 2], [2, 2], ["a", "b"])
    d = json.loads(r.to_json())
    assert set(d) == {"mae", "rmse", "mape", "per_point"}
    assert d["per_point"][0] == {"timestamp": "a", "error": -1.0}


finite = st.floats(-1e6, 1e6, allow_nan=False)


@settings(max_examples=200, deadline=None)
@given(st.lists(st.tuples(finite, finite), min_size=1, max_size=50))
def test_rmse_dominates_mae(pairs):
    a, f = map(np.array, zip(*pairs))
    r = compute_metrics(a, f)
    assert r.rmse >= r.mae >= 0


@settings(max_examples=100, deadline=None)
@given(st.lists(st.tuples(st.floats(1, 1e3), st.floats(1, 1e3)), min_size=1, max_size=30),
       st.floats(0.01, 100))
def test_metric_scale_behaviour(pairs, c):
    a, f = map(np.array, zip(*pairs))
    r, rc = compute_metrics(a, f), compute_metrics(c * a, c * f)
    assert rc.mae == pytest.approx(c * r.mae, rel=1e-9, abs=1e-9)
    assert rc.rmse == pytest.approx(c * r.rmse, rel=1e-9, abs=1e-9)
    assert rc.mape == pytest.approx(r.mape, rel=1e-9, abs=1e-9)


# ----------------------------------------------------------- forecast files


def test_forecast_csv_round_trip(tmp_path):
    t = np.datetime64("2015-01-01T00:00") + np.timedelta64(60, "m") * np.arange(5)
    a = ForecastResult("a", t, np.arange(5.0))
    b = ForecastResult("b", t, np.arange(5.0) + 1, np.arange(5.0), np.arange(5.0) + 2)
    write_forecast_csv([a, b], tmp_path / "f.csv", 60)
    back = {f.model_id: f for f in read_forecast_csv(tmp_path / "f.csv")}
    np.testing.assert_array_equal(back["a"].values, a.values)
    np.testing.assert_array_equal(back["a"].horizon, t)
    assert back["a"].lower is None
    np.testing.assert_array_equal(back["b"].upper, b.upper)


def test_forecast_bands_validated():
    t = np.array(["2015-01-01T00:00"], dtype="datetime64[m]")
    with pytest.raises(ValueError):
        ForecastResult("x", t, [1.0], [2.0], [3.0])
