import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from spotforecast.seasonal import (
    decompose,
    deseasonalize,
    dickey_fuller,
    difference,
    dominant_period,
    fit_harmonics,
    moving_average,
    reseasonalize,
    weekday_profile,
)
from spotforecast.series import DailySeries

MONDAY = np.datetime64("2014-01-06")


def _daily(values):
    values = np.asarray(values, dtype=float)
    return DailySeries(MONDAY + np.arange(values.size), values)


def test_moving_average_shrinks_at_edges():
    np.testing.assert_allclose(moving_average([1, 2, 3, 4], 3), [1.5, 2, 3, 3.5])


def test_moving_average_window_one_and_constant():
    x = np.random.default_rng(0).normal(size=20)
    np.testing.assert_array_equal(moving_average(x, 1), x)
    np.testing.assert_allclose(moving_average(np.full(30, 4.2), 7), 4.2)


@pytest.mark.parametrize("w", [2, 0, 11])
def test_moving_average_bad_window(w):
    with pytest.raises(ValueError):
        moving_average(np.arange(10.0), w)


def test_weekday_profile_examples():
    week = np.array([10, 1, 2, 3, 4, 5, 6.0])
    prof = weekday_profile(_daily(np.tile(week, 2)))
    assert prof[0] == 10
    np.testing.assert_allclose(weekday_profile(_daily(np.full(14, 3.0))), 3.0)
    two = np.tile(week, 2)
    two[7] = 20
    assert weekday_profile(_daily(two))[0] == 15


def test_weekday_profile_coverage():
    with pytest.raises(ValueError):
        weekday_profile(_daily(np.arange(10.0)))


def test_deseasonalize_examples():
    dow = np.tile(np.arange(1, 8), 2)
    prof = np.arange(7.0) * 3
    np.testing.assert_array_equal(deseasonalize(prof[dow - 1], prof, dow), 0)
    x = np.arange(14.0)
    np.testing.assert_array_equal(deseasonalize(x, np.zeros(7), dow), x)
    assert deseasonalize([50.0], [10, 0, 0, 0, 0, 0, 0], [1])[0] == 40
    np.testing.assert_array_equal(reseasonalize(deseasonalize(x, prof, dow), prof, dow), x)


def test_difference():
    np.testing.assert_array_equal(difference([5, 7, 4]), [2, -3])
    np.testing.assert_array_equal(difference(np.full(5, 2.0)), 0)
    np.testing.assert_allclose(difference(0.7 * np.arange(20)), 0.7)
    with pytest.raises(ValueError):
        difference([1.0])


@settings(max_examples=50, deadline=None)
@given(st.lists(st.floats(-1e3, 1e3), min_size=21, max_size=80))
def test_decomposition_reconstructs(values):
    d = _daily(values)
    r = decompose(d)
    x = np.asarray(values)
    # level = seasonal + deseasonalized; differencing integrates back from the first value
    np.testing.assert_allclose(r.seasonal + r.deseasonalized, x, atol=1e-9)
    rebuilt = r.deseasonalized[0] + np.r_[0.0, np.cumsum(r.residual)]
    np.testing.assert_allclose(rebuilt + r.seasonal, x, atol=1e-8)


def test_decomposition_csv(tmp_path):
    r = decompose(_daily(np.arange(28.0) % 7))
    r.to_csv(tmp_path / "d.csv")
    lines = (tmp_path / "d.csv").read_text().splitlines()
    assert lines[0] == "t,trend,seasonal,residual"
    assert len(lines) == 29 and lines[1].endswith(",")


# ---------------------------------------------------------- Dickey-Fuller


def test_df_single_seed():
    rng = np.random.default_rng(1)
    assert dickey_fuller(rng.standard_normal(1000)).reject_unit_root
    assert not dickey_fuller(np.cumsum(rng.standard_normal(1000))).reject_unit_root


def test_df_constant_errors():
    with pytest.raises(ValueError):
        dickey_fuller(np.full(100, 3.0))


def test_df_significance_levels():
    x = np.random.default_rng(2).standard_normal(200)
    for lvl, cv in [(0.01, -3.43), (0.05, -2.86), (0.10, -2.57)]:
        assert dickey_fuller(x, lvl).critical_value == cv
    with pytest.raises(ValueError):
        dickey_fuller(x, 0.2)


# ------------------------------------------------------------ periodogram


def test_dominant_period_sinusoid():
    t = np.arange(700)
    assert dominant_period(np.sin(2 * np.pi * t / 7), range(2, 60)) == 7


def test_dominant_period_mixture():
    t = np.arange(700)
    x = 2 * np.sin(2 * np.pi * t / 7) + np.sin(2 * np.pi * t / 30)
    assert dominant_period(x, range(2, 60)) == 7


def test_dominant_period_noise_none():
    hits = sum(dominant_period(np.random.default_rng(s).standard_normal(700), [7, 30, 365 // 4]) is not None
               for s in range(50))
    assert hits <= 5


# --------------------------------------------------------------- harmonics


def test_harmonics_recovery():
    rng = np.random.default_rng(3)
    coef = rng.normal(size=17)
    t = np.linspace(0, 1, 400, endpoint=False)
    from spotforecast.seasonal import HarmonicFit

    truth = HarmonicFit.from_coefficients(coef, 1.0)
    fit = fit_harmonics(t, truth(t), order=8)
    assert np.max(np.abs(fit.coefficients - coef)) <= 1e-8


def test_harmonics_constant():
    t = np.linspace(0, 1, 100, endpoint=False)
    fit = fit_harmonics(t, np.full(100, 5.0))
    assert fit.a0 == pytest.approx(5.0, abs=1e-10)
    assert np.max(np.abs(fit.coefficients[1:])) <= 1e-10


def test_harmonics_underdetermined():
    t = np.linspace(0, 1, 16, endpoint=False)
    with pytest.raises(ValueError):
        fit_harmonics(t, np.zeros(16), order=8)
    fit_harmonics(np.linspace(0, 1, 17, endpoint=False), np.zeros(17), order=8)
