import json
import math

import numpy as np
import pytest
from scipy.integrate import quad

from spotforecast.mrjd import (
    MrjdParams,
    SeasonalCoeffs,
    SimulatedPaths,
    calibrate_mrjd,
    deseasonalize_log,
    fit_seasonality,
    mrjd_forecast,
    mrjd_loglik,
    params_from_dict,
    params_to_json,
    price_shift,
    reseasonalize_log,
    seasonal_design,
    simulate_mrjd,
    simulate_x,
    transition_density,
)

TRUTH = MrjdParams(alpha=0.0, phi=0.9, sigma=0.05, mu_j=0.5, sigma_j=0.1, lambda_dt=0.03)
H = np.datetime64("2015-01-01T00:00") + np.timedelta64(1440, "m") * np.arange(30)


# -------------------------------------------------------------- seasonality


def test_seasonality_exact():
    t = np.arange(730) / 365.0
    s = SeasonalCoeffs(1, 2, 3, 4, 5)
    got = fit_seasonality(s(t), t)
    assert np.max(np.abs(got.as_array() - [1, 2, 3, 4, 5])) <= 1e-8


def test_seasonality_zero():
    t = np.arange(100) / 365.0
    np.testing.assert_allclose(fit_seasonality(np.zeros(100), t).as_array(), 0, atol=1e-14)


def test_seasonality_noise_within_standard_errors():
    t = np.arange(3650) / 365.0
    truth = np.array([0.3, -0.2, 0.1, 0.05, 3.7])
    A = seasonal_design(t)
    y = A @ truth + np.random.default_rng(0).normal(0, 0.1, t.size)
    se = 0.1 * np.sqrt(np.diag(np.linalg.inv(A.T @ A)))
    assert np.all(np.abs(fit_seasonality(y, t).as_array() - truth) <= 4 * se)


def test_seasonality_rank_deficient():
    with pytest.raises(ValueError):
        fit_seasonality(np.ones(20), np.full(20, 0.25))


def test_deseasonalize_examples():
    t = np.linspace(0, 2, 50)
    s = SeasonalCoeffs(0.1, 0.2, 0.0, -0.1, 3.0)
    np.testing.assert_allclose(deseasonalize_log(np.exp(s(t)), s, t), 0, atol=1e-12)
    p = np.linspace(10, 90, 50)
    zero = SeasonalCoeffs(0, 0, 0, 0, 0)
    np.testing.assert_allclose(deseasonalize_log(p, zero, t), np.log(p))
    with pytest.raises(ValueError, match="shift"):
        deseasonalize_log(np.r_[p[:-1], 0.0], zero, t)


def test_shift_round_trip():
    p = np.array([-5.0, 0.0, 3.0, 40.0])
    c = price_shift(p)
    assert c == pytest.approx(5.01)
    t = np.arange(4) / 365.0
    s = SeasonalCoeffs(0.1, 0, 0, 0, 1.0)
    x = deseasonalize_log(p, s, t, c)
    np.testing.assert_allclose(reseasonalize_log(x, s, t, c), p, atol=1e-12)
    assert price_shift([1.0, 2.0]) == 0.0


# --------------------------------------------------------------- likelihood


def test_loglik_single_step_standard_normal():
    p = MrjdParams(0.0, 0.0, 1.0, 0.0, 1.0, 0.0, dt=1.0)
    assert mrjd_loglik(p, [0.0, 0.0]) == pytest.approx(-0.5 * math.log(2 * math.pi), abs=1e-12)


def test_loglik_rejects_invalid():
    with pytest.raises(ValueError):
        mrjd_loglik(MrjdParams(0, 1.2, 0.1, 0, 0.1, 0.1), [0.0, 1.0])
    with pytest.raises(ValueError):
        mrjd_loglik(MrjdParams(0, 0.5, 0.1, 0, 0.1, 1.5), [0.0, 1.0])


@pytest.mark.parametrize("x_prev", [-0.4, 0.0, 1.3])
def test_density_integrates_to_one(x_prev):
    val, _ = quad(lambda v: transition_density(TRUTH, v, x_prev)[0], -np.inf, np.inf,
                  points=None, epsabs=1e-12, limit=200)
    assert val == pytest.approx(1.0, abs=1e-6)


def test_density_mean_matches_mixture():
    x_prev = 0.3
    m, _ = quad(lambda v: v * transition_density(TRUTH, v, x_prev)[0], -5, 5, limit=200)
    expected = TRUTH.alpha * TRUTH.dt + TRUTH.phi * x_prev + TRUTH.lambda_dt * TRUTH.mu_j
    assert m == pytest.approx(expected, abs=1e-9)


# -------------------------------------------------------------- calibration


def test_calibrate_pure_ou():
    x = simulate_x(MrjdParams(0.0, 0.8, 0.1, 0.0, 0.1, 0.0), 0.0, 3650, 1, seed=5)[0]
    fit = calibrate_mrjd(x)
    p = fit.params
    assert p.lambda_dt <= 0.02
    # AR(1) regression bands
    prev, cur = x[:-1], x[1:]
    phi_ols = np.polyfit(prev, cur, 1)[0]
    se = np.sqrt((1 - phi_ols**2) / prev.size)
    assert abs(p.phi - phi_ols) <= 3 * se
    assert p.sigma == pytest.approx(0.1, rel=0.1)


def test_calibrate_constant_flagged():
    fit = calibrate_mrjd(np.full(500, 0.2))
    assert fit.degenerate


def test_params_json_round_trip():
    x = simulate_x(TRUTH, 0.0, 2000, 1, seed=3)[0]
    fit = calibrate_mrjd(x)
    coeffs = SeasonalCoeffs(0.1, 0.2, 0.3, 0.4, 3.5)
    d = json.loads(params_to_json(fit, coeffs, 1.5))
    for key in ("alpha", "phi", "sigma", "mu_j", "sigma_j", "lambda_dt", "loglik", "s1", "s5", "shift"):
        assert key in d
    p, c, shift = params_from_dict(d)
    assert p == fit.params and c == coeffs and shift == 1.5


# --------------------------------------------------------------- simulation


def test_deterministic_recursion():
    p = MrjdParams(0.1, 0.5, 0.0, 0.0, 0.0, 0.0, dt=1.0)
    x = simulate_x(p, 1.0, 2, 3, seed=0)
    np.testing.assert_allclose(x, [[0.6, 0.4]] * 3)


def test_same_seed_bit_identical_and_worker_independent():
    a = simulate_x(TRUTH, 0.1, 100, 40, seed=7)
    b = simulate_x(TRUTH, 0.1, 100, 40, seed=7)
    c = simulate_x(TRUTH, 0.1, 100, 40, seed=7, workers=3)
    assert np.array_equal(a, b) and np.array_equal(a, c)
    assert not np.array_equal(a, simulate_x(TRUTH, 0.1, 100, 40, seed=8))


def test_path_prefix_stable():
    # adding paths does not change earlier ones
    a = simulate_x(TRUTH, 0.0, 50, 10, seed=1)
    b = simulate_x(TRUTH, 0.0, 50, 20, seed=1)
    assert np.array_equal(a, b[:10])


def test_stationary_variance_identity():
    p = MrjdParams(alpha=2.0, phi=0.8, sigma=0.1, mu_j=0.3, sigma_j=0.2, lambda_dt=0.05)
    mean = (p.alpha * p.dt + p.lambda_dt * p.mu_j) / (1 - p.phi)
    x = simulate_x(p, mean, 1_000_000, 1, seed=11)[0]
    assert x.mean() == pytest.approx(mean, abs=0.003)
    assert x.var() == pytest.approx(p.stationary_variance(), rel=0.02)


def test_simulate_mrjd_prices():
    coeffs = SeasonalCoeffs(0.1, 0.0, 0.0, 0.0, math.log(40))
    t = np.arange(30) / 365.0
    paths = simulate_mrjd(TRUTH, coeffs, 0.0, H, t, 200, seed=2, shift=1.0)
    assert paths.values.shape == (200, 30)
    np.testing.assert_allclose(paths.values, np.exp(paths.x + coeffs(t)) - 1.0)


def test_band_coverage():
    coeffs = SeasonalCoeffs(0, 0, 0, 0, math.log(40))
    t = np.arange(30) / 365.0
    paths = simulate_mrjd(TRUTH, coeffs, 0.2, H, t, 2000, seed=1)
    fc = mrjd_forecast(paths, (0.05, 0.95))
    fresh = simulate_mrjd(TRUTH, coeffs, 0.2, H, t, 4000, seed=99).values
    cover = np.mean((fresh >= fc.lower) & (fresh <= fc.upper), axis=0)
    # binomial sd at n=4000 is about 0.005; quantile noise adds a little
    assert np.all(np.abs(cover - 0.90) <= 0.03)


def test_forecast_identical_paths():
    p = MrjdParams(0.0, 0.5, 0.0, 0.0, 0.0, 0.0)
    coeffs = SeasonalCoeffs(0, 0, 0, 0, 3.0)
    paths = simulate_mrjd(p, coeffs, 0.5, H, np.zeros(30), 100, seed=0)
    fc = mrjd_forecast(paths)
    np.testing.assert_array_equal(fc.values, paths.values[0])
    np.testing.assert_array_equal(fc.lower, fc.upper)


def test_forecast_median_odd():
    vals = np.arange(101.0)[:, None] * np.ones((1, 3))
    paths = SimulatedPaths(H[:3], np.random.default_rng(0).permutation(vals), vals, 0)
    fc = mrjd_forecast(paths, None)
    np.testing.assert_array_equal(fc.values, 50.0)


def test_forecast_quantile_validation():
    vals = np.ones((100, 3))
    paths = SimulatedPaths(H[:3], vals, vals, 0)
    with pytest.raises(ValueError):
        mrjd_forecast(paths, (0.0, 0.95))
    with pytest.raises(ValueError):
        mrjd_forecast(SimulatedPaths(H[:3], vals[:50], vals[:50], 0))
